//! Overlap and orientation metrics, plus the two training losses as plain
//! functions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, OrientationMap};
use crate::Vec3;

/// Probability clamp used by [`bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

/// Dice overlap `2|A∩B| / (|A|+|B|)`. Two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.geometry().ensure_matches(b.geometry(), "dice")?;
    let (na, nb) = (a.count(), b.count());
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * a.intersection_count(b) as f64 / (na + nb) as f64)
}

/// Axial angle in degrees between two nonzero vectors, in `[0, 90]`.
pub fn axial_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    let c = (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0);
    c.acos().to_degrees()
}

/// Mean voxel-wise axial angular error over voxels where both peaks are
/// nonzero. Returns the mean in degrees and the number of voxels compared.
pub fn mean_angular_error(a: &OrientationMap, b: &OrientationMap) -> Result<(f64, usize)> {
    a.geometry().ensure_matches(b.geometry(), "mean_angular_error")?;
    let (mut sum, mut count) = (0.0, 0usize);
    for (u, v) in a.data().iter().zip(b.data()) {
        if u.norm() > 0.0 && v.norm() > 0.0 {
            sum += axial_angle_deg(u, v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoComparableVoxels);
    }
    Ok((sum / count as f64, count))
}

/// Paired target / prediction arrays for a loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossSample<'a, T> {
    pub y: &'a [T],
    pub y_hat: &'a [T],
}

impl<'a, T> LossSample<'a, T> {
    pub fn new(y: &'a [T], y_hat: &'a [T]) -> Result<Self> {
        if y.len() != y_hat.len() {
            return Err(Error::ShapeMismatch(format!(
                "target has {} elements, prediction {}",
                y.len(),
                y_hat.len()
            )));
        }
        Ok(Self { y, y_hat })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Binary cross-entropy averaged over all elements; predictions are clamped
/// to `[ε, 1−ε]`.
pub fn bce_loss(s: LossSample<'_, f64>) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::ShapeMismatch("empty loss sample".into()));
    }
    let total: f64 = s
        .y
        .iter()
        .zip(s.y_hat)
        .map(|(&y, &p)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / s.len() as f64)
}

/// Negative mean absolute cosine similarity; lies in `[−1, 0]`.
pub fn cosine_loss(s: LossSample<'_, Vec3>) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::ShapeMismatch("empty loss sample".into()));
    }
    let mut total = 0.0;
    for (i, (y, p)) in s.y.iter().zip(s.y_hat).enumerate() {
        let denom = y.norm() * p.norm();
        if !(denom > 0.0) {
            return Err(Error::ZeroNormVector(i));
        }
        total += p.dot(y).abs() / denom;
    }
    Ok(-total / s.len() as f64)
}

/// Scores of one bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleScores {
    pub dice: f64,
    /// `None` when no TOMs were supplied or no voxel had two nonzero peaks.
    pub mean_angular_error_deg: Option<f64>,
    pub voxels_compared: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_bundle: BTreeMap<String, BundleScores>,
    pub mean_dice: f64,
    /// Mean over the bundles that have an angular error.
    pub mean_angular_error_deg: Option<f64>,
}

/// Scores every bundle and averages across bundles.
///
/// Mask maps must share one name set. TOM maps may be empty (masks only);
/// otherwise they must cover the same names as the masks.
pub fn evaluate(
    pred_masks: &BTreeMap<String, BinaryMask>,
    ref_masks: &BTreeMap<String, BinaryMask>,
    pred_toms: &BTreeMap<String, OrientationMap>,
    ref_toms: &BTreeMap<String, OrientationMap>,
) -> Result<EvalReport> {
    let names = |m: Vec<&String>| m.into_iter().cloned().collect::<Vec<_>>();
    let mask_names = names(pred_masks.keys().collect());
    if mask_names != names(ref_masks.keys().collect()) {
        return Err(Error::BundleNameMismatch(format!(
            "predicted masks {:?} vs reference masks {:?}",
            mask_names,
            names(ref_masks.keys().collect())
        )));
    }
    let with_toms = !(pred_toms.is_empty() && ref_toms.is_empty());
    if with_toms {
        for (label, toms) in [("predicted", pred_toms), ("reference", ref_toms)] {
            if names(toms.keys().collect()) != mask_names {
                return Err(Error::BundleNameMismatch(format!(
                    "{label} TOMs {:?} vs masks {:?}",
                    names(toms.keys().collect()),
                    mask_names
                )));
            }
        }
    }

    let mut per_bundle = BTreeMap::new();
    for name in &mask_names {
        let d = dice(&pred_masks[name], &ref_masks[name])?;
        let (err, count) = if with_toms {
            match mean_angular_error(&pred_toms[name], &ref_toms[name]) {
                Ok((e, c)) => (Some(e), c),
                Err(Error::NoComparableVoxels) => (None, 0),
                Err(e) => return Err(e),
            }
        } else {
            (None, 0)
        };
        per_bundle.insert(
            name.clone(),
            BundleScores {
                dice: d,
                mean_angular_error_deg: err,
                voxels_compared: count,
            },
        );
    }
    let mean_dice = if per_bundle.is_empty() {
        f64::NAN
    } else {
        per_bundle.values().map(|s| s.dice).sum::<f64>() / per_bundle.len() as f64
    };
    let errs: Vec<f64> = per_bundle.values().filter_map(|s| s.mean_angular_error_deg).collect();
    let mean_angular_error_deg = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
    Ok(EvalReport {
        per_bundle,
        mean_dice,
        mean_angular_error_deg,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl EvalReport {
    /// Human-readable table, one bundle per line followed by a mean line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.per_bundle.keys().map(|k| k.len()).max().unwrap_or(6).max(6);
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>12}  {:>10}", "bundle", "dice", "ang_err_deg", "voxels");
        for (name, s) in &self.per_bundle {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>10.6}  {:>12}  {:>10}",
                s.dice,
                fmt_opt(s.mean_angular_error_deg),
                s.voxels_compared
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.6}  {:>12}  {:>10}",
            "MEAN",
            self.mean_dice,
            fmt_opt(self.mean_angular_error_deg),
            ""
        );
        out
    }

    /// Machine-readable records: one line per bundle of space-separated
    /// `key=value` pairs (`bundle`, `dice`, `mean_angular_error_deg`,
    /// `voxels_compared`), then one `summary` record (`bundles`, `mean_dice`,
    /// `mean_angular_error_deg`). Missing angular errors are written as `NA`.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (name, s) in &self.per_bundle {
            let _ = writeln!(
                out,
                "bundle={name} dice={:.9} mean_angular_error_deg={} voxels_compared={}",
                s.dice,
                s.mean_angular_error_deg.map_or_else(|| "NA".into(), |v| format!("{v:.9}")),
                s.voxels_compared
            );
        }
        let _ = writeln!(
            out,
            "summary bundles={} mean_dice={:.9} mean_angular_error_deg={}",
            self.per_bundle.len(),
            self.mean_dice,
            self.mean_angular_error_deg.map_or_else(|| "NA".into(), |v| format!("{v:.9}"))
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridGeometry;

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::axis_aligned([n, 1, 1], [1.0; 3], Vec3::zeros()).unwrap()
    }

    fn mask(bits: &[u8]) -> BinaryMask {
        BinaryMask::from_data(geom(bits.len()), bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    fn tom(v: &[Vec3]) -> OrientationMap {
        OrientationMap::from_data(geom(v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn dice_examples() {
        let a = mask(&[1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &mask(&[0, 0, 1, 1])).unwrap(), 0.0);
        let a = mask(&[1, 1, 1, 1, 0, 0, 0]);
        let b = mask(&[0, 1, 1, 1, 1, 1, 1]);
        assert!((dice(&a, &b).unwrap() - 0.6).abs() < 1e-12);
        assert!((dice(&b, &a).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(dice(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
        assert!(matches!(dice(&mask(&[0]), &mask(&[0, 0])), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn angular_error_examples() {
        let x = Vec3::x();
        let (e, n) = mean_angular_error(&tom(&[x]), &tom(&[Vec3::y()])).unwrap();
        assert!((e - 90.0).abs() < 1e-9 && n == 1);
        let (e, _) = mean_angular_error(&tom(&[x]), &tom(&[-x])).unwrap();
        assert!(e.abs() < 1e-6);
        let (e, _) = mean_angular_error(&tom(&[x]), &tom(&[Vec3::new(1.0, 1.0, 0.0) / 2f64.sqrt()])).unwrap();
        assert!((e - 45.0).abs() < 1e-6);
    }

    #[test]
    fn angular_error_skips_zero_voxels_and_is_symmetric() {
        let a = tom(&[Vec3::x(), Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0)]);
        let b = tom(&[Vec3::new(2.0, 0.0, 0.0), Vec3::y(), Vec3::y()]);
        let (e1, n1) = mean_angular_error(&a, &b).unwrap();
        let (e2, _) = mean_angular_error(&b, &a).unwrap();
        let scaled = tom(&a.data().iter().map(|v| v * 2.0).collect::<Vec<_>>());
        let (e3, _) = mean_angular_error(&scaled, &b).unwrap();
        assert_eq!(n1, 2);
        assert!((e1 - 22.5).abs() < 1e-9);
        assert!((e1 - e2).abs() < 1e-12 && (e1 - e3).abs() < 1e-12);
        let empty = tom(&[Vec3::zeros(); 3]);
        assert!(matches!(mean_angular_error(&a, &empty), Err(Error::NoComparableVoxels)));
    }

    #[test]
    fn bce_examples() {
        let one = [1.0];
        let v = bce_loss(LossSample::new(&one, &[1.0 - BCE_EPS]).unwrap()).unwrap();
        assert!(v.abs() < 1e-6);
        let v = bce_loss(LossSample::new(&one, &[0.5]).unwrap()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-6);
        let v = bce_loss(LossSample::new(&[0.0], &[0.5]).unwrap()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-6);
        assert!(LossSample::new(&[0.0, 1.0], &[0.5]).is_err());
        // clamped predictions keep the loss finite
        assert!(bce_loss(LossSample::new(&[1.0, 0.0], &[0.0, 1.0]).unwrap()).unwrap().is_finite());
    }

    #[test]
    fn cosine_examples() {
        let y = [Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 0.0)];
        let same = cosine_loss(LossSample::new(&y, &y).unwrap()).unwrap();
        assert!((same + 1.0).abs() < 1e-12);
        let neg: Vec<Vec3> = y.iter().map(|v| -v).collect();
        assert!((cosine_loss(LossSample::new(&y, &neg).unwrap()).unwrap() + 1.0).abs() < 1e-12);
        let perp = [Vec3::new(3.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 4.0)];
        assert!(cosine_loss(LossSample::new(&y, &perp).unwrap()).unwrap().abs() < 1e-12);
        assert!(matches!(
            cosine_loss(LossSample::new(&y, &[Vec3::x(), Vec3::zeros()]).unwrap()),
            Err(Error::ZeroNormVector(1))
        ));
    }

    #[test]
    fn evaluate_identity_and_means() {
        let m = mask(&[1, 1, 0, 0, 0]);
        let t = tom(&[Vec3::x(), Vec3::y(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros()]);
        let masks = BTreeMap::from([("cst".to_string(), m)]);
        let toms = BTreeMap::from([("cst".to_string(), t)]);
        let r = evaluate(&masks, &masks, &toms, &toms).unwrap();
        assert_eq!(r.per_bundle["cst"].dice, 1.0);
        assert!(r.per_bundle["cst"].mean_angular_error_deg.unwrap().abs() < 1e-6);

        // dice 0.8 and 0.6
        let a2 = mask(&[1, 1, 1, 1, 1, 1, 1, 0, 0, 0]);
        let b2 = mask(&[0, 1, 1, 1, 0, 0, 0, 0, 0, 0]);
        let pred = BTreeMap::from([("a".to_string(), mask(&[1, 1, 0, 0, 0])), ("b".to_string(), a2)]);
        let refm = BTreeMap::from([("a".to_string(), mask(&[1, 1, 1, 0, 0])), ("b".to_string(), b2)]);
        let r = evaluate(&pred, &refm, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert!((r.per_bundle["a"].dice - 0.8).abs() < 1e-12);
        assert!((r.per_bundle["b"].dice - 0.6).abs() < 1e-12);
        assert!((r.mean_dice - 0.7).abs() < 1e-12);
        assert_eq!(r.mean_angular_error_deg, None);
        assert!(r.to_key_value().contains("bundle=a dice=0.800000000 mean_angular_error_deg=NA"));
    }

    #[test]
    fn evaluate_rejects_name_mismatch() {
        let m = mask(&[1]);
        let p = BTreeMap::from([("a".to_string(), m.clone())]);
        let r = BTreeMap::from([("b".to_string(), m)]);
        assert!(matches!(
            evaluate(&p, &r, &BTreeMap::new(), &BTreeMap::new()),
            Err(Error::BundleNameMismatch(_))
        ));
    }
}
