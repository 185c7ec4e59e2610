use rand::Rng;

use super::{check_streamline, interpolate_peak, sample_direction, TrackerConfig, TrackingContext, TrackingMode};
use crate::streamlines::{segment_in_mask, smooth_bspline, Streamline};
use crate::Vec3;

/// Why a tracking attempt produced no streamline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    TooShort,
    EndpointNotInRegions,
    /// Seed on a zero peak, or fewer than 2 points.
    LeftMaskDegenerate,
    /// A point's nearest voxel lies outside the tract mask.
    LeftTractMask,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::EndpointNotInRegions => "endpoint_not_in_regions",
            RejectReason::LeftMaskDegenerate => "left_mask_degenerate",
            RejectReason::LeftTractMask => "left_tract_mask",
        }
    }
}

/// Tracks both ways from `seed_vox` (voxel coordinates) and returns the
/// world-space streamline if it passes every filter condition.
///
/// Each step must keep the whole segment inside the tract mask as sampled by
/// voxelization, which is stricter than the per-point filter condition.
/// Accepted streamlines are spline smoothed when `cfg.smooth` is set. If the
/// smoothed curve would break either condition, the unsmoothed one is
/// returned instead.
pub fn track_streamline<R: Rng + ?Sized>(
    ctx: &TrackingContext,
    seed_vox: Vec3,
    cfg: &TrackerConfig,
    rng: &mut R,
) -> Result<Streamline, RejectReason> {
    let geom = ctx.tom.geometry();
    let Some(seed_ijk) = geom.nearest_voxel(seed_vox) else {
        return Err(RejectReason::LeftTractMask);
    };
    if !ctx.tract_mask.get(seed_ijk) {
        return Err(RejectReason::LeftTractMask);
    }
    let d0 = ctx.tom.get(seed_ijk);
    let n0 = d0.norm();
    if !(n0 > 0.0) {
        return Err(RejectReason::LeftMaskDegenerate);
    }
    let d0 = d0 / n0;

    let forward = march(ctx, seed_vox, d0, cfg, rng);
    let backward = march(ctx, seed_vox, -d0, cfg, rng);
    let mut vox: Vec<Vec3> = Vec::with_capacity(forward.len() + backward.len() + 1);
    vox.extend(backward.iter().rev());
    vox.push(seed_vox);
    vox.extend(forward);
    if vox.len() < 2 {
        return Err(RejectReason::LeftMaskDegenerate);
    }

    let raw = Streamline::from_raw(vox.into_iter().map(|p| geom.voxel_to_world(p)).collect());
    check_streamline(&raw, ctx, cfg.min_length_mm)?;
    if !cfg.smooth {
        return Ok(raw);
    }
    let smoothing = cfg.smoothing_per_point * raw.len() as f64;
    let spacing = cfg.step_size_vox * geom.mean_spacing();
    let smoothed = smooth_bspline(&raw, smoothing, spacing);
    let vox: Vec<Vec3> = smoothed.points().iter().map(|&p| geom.world_to_voxel(p)).collect();
    let contained = vox.windows(2).all(|w| segment_in_mask(&ctx.tract_mask, w[0], w[1]));
    if contained && check_streamline(&smoothed, ctx, cfg.min_length_mm).is_ok() {
        Ok(smoothed)
    } else {
        Ok(raw)
    }
}

/// One tracking direction. Returns the positions after the seed, in voxels.
fn march<R: Rng + ?Sized>(
    ctx: &TrackingContext,
    start: Vec3,
    initial_dir: Vec3,
    cfg: &TrackerConfig,
    rng: &mut R,
) -> Vec<Vec3> {
    let geom = ctx.tom.geometry();
    let std = match cfg.mode {
        TrackingMode::Probabilistic => cfg.gaussian_std,
        TrackingMode::Deterministic => 0.0,
    };
    let mut out = Vec::new();
    let (mut pos, mut prev) = (start, initial_dir);
    for _ in 0..cfg.max_steps {
        let peak = interpolate_peak(&ctx.tom, pos, Some(prev));
        let n = peak.norm();
        if n < cfg.peak_eps || n == 0.0 {
            break;
        }
        let Ok(mut dir) = sample_direction(&peak, std, rng) else {
            break;
        };
        if dir.dot(&prev) < 0.0 {
            dir = -dir;
        }
        let step = geom.direction_to_voxel(dir);
        let len = step.norm();
        if len == 0.0 {
            break;
        }
        let next = pos + step * (cfg.step_size_vox / len);
        if !segment_in_mask(&ctx.tract_mask, pos, next) {
            break;
        }
        out.push(next);
        pos = next;
        prev = dir;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BinaryMask, GridGeometry, OrientationMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 2 mm grid with a straight +x tube of half-width 1 voxel, from x=2 to x=37.
    fn tube() -> TrackingContext {
        let g = GridGeometry::axis_aligned([40, 5, 5], [2.0; 3], Vec3::zeros()).unwrap();
        let mut tom = OrientationMap::zeros(g.clone());
        let mut tract = BinaryMask::empty(g.clone());
        let mut start = BinaryMask::empty(g.clone());
        let mut end = BinaryMask::empty(g.clone());
        for x in 2..38 {
            for y in 1..4 {
                for z in 1..4 {
                    tom.set([x, y, z], Vec3::x());
                    tract.set([x, y, z], true);
                    if x <= 3 {
                        start.set([x, y, z], true);
                    }
                    if x >= 36 {
                        end.set([x, y, z], true);
                    }
                }
            }
        }
        TrackingContext::new(tom, tract, start, end).unwrap()
    }

    #[test]
    fn deterministic_spans_the_tube() {
        let ctx = tube();
        let cfg = TrackerConfig { mode: TrackingMode::Deterministic, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = track_streamline(&ctx, Vec3::new(20.0, 2.0, 2.0), &cfg, &mut rng).unwrap();
        // tube covers voxel centres 2..=37 plus half a voxel each side: 72 mm
        let expected = 72.0;
        assert!((s.arc_length() - expected).abs() / expected < 0.05, "{}", s.arc_length());
    }

    #[test]
    fn zero_std_matches_deterministic() {
        let ctx = tube();
        let det = TrackerConfig { mode: TrackingMode::Deterministic, smooth: false, ..Default::default() };
        let prob = TrackerConfig { gaussian_std: 0.0, mode: TrackingMode::Probabilistic, ..det.clone() };
        for seed in [Vec3::new(10.3, 1.6, 2.4), Vec3::new(30.0, 3.4, 1.0)] {
            let a = track_streamline(&ctx, seed, &det, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let b = track_streamline(&ctx, seed, &prob, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn output_voxelizes_inside_the_mask() {
        let mut ctx = tube();
        // diagonal field so steps cut voxel corners
        for v in ctx.tom.data_mut() {
            if *v != Vec3::zeros() {
                *v = Vec3::new(1.0, 0.3, 0.2);
            }
        }
        let cfg = TrackerConfig { min_length_mm: 0.0, ..Default::default() };
        let g = ctx.tom.geometry().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..100 {
            let seed = Vec3::new(4.0 + (k % 30) as f64, 1.0 + (k % 3) as f64, 1.0 + (k / 3 % 3) as f64);
            if let Ok(s) = track_streamline(&ctx, seed, &cfg, &mut rng) {
                let t = crate::streamlines::Tractogram::new(vec![s], g.clone());
                let m = crate::streamlines::voxelize(&t);
                assert_eq!(m.intersection_count(&ctx.tract_mask), m.count());
            }
        }
    }

    #[test]
    fn zero_tom_seed_is_degenerate() {
        let mut ctx = tube();
        ctx.tom.set([20, 2, 2], Vec3::zeros());
        let r = track_streamline(&ctx, Vec3::new(20.0, 2.0, 2.0), &TrackerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r, Err(RejectReason::LeftMaskDegenerate));
    }

    #[test]
    fn short_tube_is_too_short() {
        let ctx = tube();
        let cfg = TrackerConfig { mode: TrackingMode::Deterministic, min_length_mm: 80.0, ..Default::default() };
        let r = track_streamline(&ctx, Vec3::new(20.0, 2.0, 2.0), &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r, Err(RejectReason::TooShort));
    }

    #[test]
    fn accepted_output_passes_the_filter() {
        let ctx = tube();
        let cfg = TrackerConfig { min_length_mm: 40.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut accepted = 0;
        for k in 0..200 {
            let seed = Vec3::new(5.0 + (k % 30) as f64, 2.0, 2.0);
            if let Ok(s) = track_streamline(&ctx, seed, &cfg, &mut rng) {
                assert_eq!(check_streamline(&s, &ctx, cfg.min_length_mm), Ok(()));
                accepted += 1;
            }
        }
        assert!(accepted > 0);
    }
}
