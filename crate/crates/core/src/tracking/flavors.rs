use crate::error::{Error, Result};
use crate::geometry::{OrientationMap, PeakImage};
use crate::Vec3;

/// For each voxel with a nonzero TOM peak, the original peak with the smallest
/// axial angle to it, sign-flipped to agree with the TOM. Voxels without TOM
/// or without any nonzero original peak are zero.
pub fn select_best_original_peak(peaks: &PeakImage, tom: &OrientationMap) -> Result<OrientationMap> {
    tom.geometry().ensure_matches(peaks.geometry(), "peak image vs TOM")?;
    let data = tom
        .data()
        .iter()
        .enumerate()
        .map(|(i, t)| best_peak(peaks.peaks(i), t).unwrap_or_else(Vec3::zeros))
        .collect();
    OrientationMap::from_data(tom.geometry().clone(), data)
}

fn best_peak(candidates: &[Vec3; 3], tom: &Vec3) -> Option<Vec3> {
    let tn = tom.norm();
    if tn == 0.0 {
        return None;
    }
    let mut best: Option<(f64, Vec3)> = None;
    for p in candidates {
        let pn = p.norm();
        if pn == 0.0 {
            continue;
        }
        let cos = (p.dot(tom) / (pn * tn)).abs();
        if best.is_none_or(|(c, _)| cos > c) {
            best = Some((cos, *p));
        }
    }
    best.map(|(_, p)| if p.dot(tom) < 0.0 { -p } else { p })
}

/// Weighted mean of the unit TOM peak and the unit best original peak:
/// `normalize(weight * u + (1 - weight) * b)` with `u` sign-aligned to `b`.
/// Where no original peak exists the unit TOM peak is used.
pub fn fuse_prior(tom: &OrientationMap, peaks: &PeakImage, weight: f64) -> Result<OrientationMap> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!("prior weight must be in [0, 1], got {weight}")));
    }
    tom.geometry().ensure_matches(peaks.geometry(), "peak image vs TOM")?;
    let data = tom
        .data()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let tn = t.norm();
            if tn == 0.0 {
                return Vec3::zeros();
            }
            let Some(b) = best_peak(peaks.peaks(i), t) else {
                return t / tn;
            };
            let b = b.normalize();
            let mut u = t / tn;
            if u.dot(&b) < 0.0 {
                u = -u;
            }
            let m = u * weight + b * (1.0 - weight);
            let n = m.norm();
            if n > 0.0 {
                m / n
            } else {
                u
            }
        })
        .collect();
    OrientationMap::from_data(tom.geometry().clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridGeometry;
    use crate::metrics::axial_angle_deg;
    use proptest::prelude::*;

    fn single(tom: Vec3, peaks: [Vec3; 3]) -> (OrientationMap, PeakImage) {
        let g = GridGeometry::axis_aligned([1, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        (
            OrientationMap::from_data(g.clone(), vec![tom]).unwrap(),
            PeakImage::from_data(g, vec![peaks]).unwrap(),
        )
    }

    fn at_deg(d: f64) -> Vec3 {
        let r = d.to_radians();
        Vec3::new(r.cos(), r.sin(), 0.0)
    }

    #[test]
    fn exact_match_returns_that_peak() {
        let p = [Vec3::x(), Vec3::new(0.0, 0.5, 0.5), Vec3::z()];
        let (t, pk) = single(Vec3::new(0.0, 0.5, 0.5), p);
        assert_eq!(select_best_original_peak(&pk, &t).unwrap().data()[0], p[1]);
    }

    #[test]
    fn stored_negation_is_flipped() {
        let (t, pk) = single(Vec3::y(), [-Vec3::y(), Vec3::zeros(), Vec3::zeros()]);
        assert_eq!(select_best_original_peak(&pk, &t).unwrap().data()[0], Vec3::y());
    }

    #[test]
    fn ten_forty_eighty_picks_ten() {
        let (t, pk) = single(Vec3::x(), [at_deg(40.0), at_deg(80.0), at_deg(10.0)]);
        let got = select_best_original_peak(&pk, &t).unwrap().data()[0];
        assert!((got - at_deg(10.0)).norm() < 1e-12);
        // hand computed: cos 10° > cos 40° > cos 80°
        assert!(10f64.to_radians().cos() > 40f64.to_radians().cos());
    }

    #[test]
    fn zero_tom_gives_zero() {
        let (t, pk) = single(Vec3::zeros(), [Vec3::x(); 3]);
        assert_eq!(select_best_original_peak(&pk, &t).unwrap().data()[0], Vec3::zeros());
        assert_eq!(fuse_prior(&t, &pk, 0.5).unwrap().data()[0], Vec3::zeros());
    }

    #[test]
    fn fuse_boundaries() {
        let (t, pk) = single(-at_deg(20.0) * 3.0, [at_deg(50.0) * 0.4, Vec3::z(), Vec3::zeros()]);
        let w1 = fuse_prior(&t, &pk, 1.0).unwrap().data()[0];
        assert!(axial_angle_deg(&w1, &at_deg(20.0)) < 1e-6 && (w1.norm() - 1.0).abs() < 1e-12);
        let w0 = fuse_prior(&t, &pk, 0.0).unwrap().data()[0];
        // best original is sign-aligned to the TOM, so it comes out as -at_deg(50)
        assert!((w0 + at_deg(50.0)).norm() < 1e-12);
    }

    #[test]
    fn fuse_half_bisects_sixty_degrees() {
        let (t, pk) = single(at_deg(0.0), [at_deg(60.0), Vec3::zeros(), Vec3::zeros()]);
        let f = fuse_prior(&t, &pk, 0.5).unwrap().data()[0];
        // bisector of 0° and 60° in the xy plane
        assert!((f - at_deg(30.0)).norm() < 1e-6);
        assert!((f.dot(&at_deg(0.0)).acos().to_degrees() - 30.0).abs() < 1e-6);
        assert!((f.dot(&at_deg(60.0)).acos().to_degrees() - 30.0).abs() < 1e-6);
    }

    #[test]
    fn fuse_rejects_bad_weight() {
        let (t, pk) = single(Vec3::x(), [Vec3::x(); 3]);
        assert!(fuse_prior(&t, &pk, 1.5).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn selected_peak_is_axially_closest(tom in vec3(), a in vec3(), b in vec3(), c in vec3()) {
            prop_assume!(tom.norm() > 1e-3 && a.norm() > 1e-3 && b.norm() > 1e-3 && c.norm() > 1e-3);
            let (t, pk) = single(tom, [a, b, c]);
            let out = select_best_original_peak(&pk, &t).unwrap().data()[0];
            prop_assert!(out.dot(&tom) >= 0.0);
            let got = axial_angle_deg(&out, &tom);
            for p in [a, b, c] {
                prop_assert!(got <= axial_angle_deg(&p, &tom) + 1e-9);
            }
        }
    }
}
