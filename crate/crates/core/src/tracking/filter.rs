use super::{RejectReason, TrackingContext};
use crate::streamlines::{Streamline, Tractogram};
use crate::Vec3;

/// Checks one world-space streamline against the tract mask, the endpoint
/// regions and the minimum length, in that order.
pub fn check_streamline(s: &Streamline, ctx: &TrackingContext, min_length_mm: f64) -> Result<(), RejectReason> {
    let pts = s.points();
    if pts.len() < 2 {
        return Err(RejectReason::LeftMaskDegenerate);
    }
    if !pts.iter().all(|&p| ctx.tract_mask.contains_world(p)) {
        return Err(RejectReason::LeftTractMask);
    }
    if !endpoints_in_regions(pts[0], pts[pts.len() - 1], ctx) {
        return Err(RejectReason::EndpointNotInRegions);
    }
    if s.arc_length() < min_length_mm {
        return Err(RejectReason::TooShort);
    }
    Ok(())
}

fn endpoints_in_regions(a: Vec3, b: Vec3, ctx: &TrackingContext) -> bool {
    let (s, e) = (&ctx.start_mask, &ctx.end_mask);
    (s.contains_world(a) && e.contains_world(b)) || (s.contains_world(b) && e.contains_world(a))
}

/// Keeps the streamlines that pass [`check_streamline`], in input order.
pub fn filter_streamlines(t: &Tractogram, ctx: &TrackingContext, min_length_mm: f64) -> Tractogram {
    let kept = t
        .streamlines
        .iter()
        .filter(|s| check_streamline(s, ctx, min_length_mm).is_ok())
        .cloned()
        .collect();
    Tractogram::new(kept, t.geometry.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BinaryMask, GridGeometry, OrientationMap};
    use proptest::prelude::*;

    fn ctx() -> TrackingContext {
        ctx_len(60)
    }

    /// 1 mm grid, tract = row y=z=1 for x in 0..len, start at x<=1, end at the last 2 voxels.
    fn ctx_len(len: usize) -> TrackingContext {
        let g = GridGeometry::axis_aligned([64, 3, 3], [1.0; 3], Vec3::zeros()).unwrap();
        let mut tract = BinaryMask::empty(g.clone());
        let mut start = BinaryMask::empty(g.clone());
        let mut end = BinaryMask::empty(g.clone());
        for x in 0..len {
            tract.set([x, 1, 1], true);
        }
        for x in 0..2 {
            start.set([x, 1, 1], true);
        }
        for x in len - 2..len {
            end.set([x, 1, 1], true);
        }
        TrackingContext::new(OrientationMap::zeros(g), tract, start, end).unwrap()
    }

    fn line(x0: f64, x1: f64) -> Streamline {
        let n = ((x1 - x0).abs().ceil() as usize).max(1);
        Streamline::new((0..=n).map(|k| Vec3::new(x0 + (x1 - x0) * k as f64 / n as f64, 1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn valid_streamline_is_kept_in_either_direction() {
        let c = ctx();
        assert_eq!(check_streamline(&line(0.0, 59.0), &c, 50.0), Ok(()));
        assert_eq!(check_streamline(&line(59.0, 0.0), &c, 50.0), Ok(()));
    }

    #[test]
    fn endpoint_outside_regions_is_removed() {
        assert_eq!(check_streamline(&line(0.0, 55.0), &ctx(), 50.0), Err(RejectReason::EndpointNotInRegions));
    }

    #[test]
    fn leaving_the_mask_is_removed() {
        let mut pts = line(0.0, 59.0).into_points();
        pts[20].y = 2.0;
        let s = Streamline::new(pts).unwrap();
        assert_eq!(check_streamline(&s, &ctx(), 50.0), Err(RejectReason::LeftTractMask));
    }

    #[test]
    fn forty_nine_mm_is_too_short_for_fifty() {
        let c = ctx_len(50);
        let s = line(0.0, 49.0);
        assert!((s.arc_length() - 49.0).abs() < 1e-12);
        assert_eq!(check_streamline(&s, &c, 50.0), Err(RejectReason::TooShort));
        assert_eq!(check_streamline(&s, &c, 49.0), Ok(()));
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_and_monotone(
            spans in proptest::collection::vec((0.0f64..62.0, 0.0f64..62.0), 1..30),
            min_len in 0.0f64..70.0,
            keep_mask in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let c = ctx();
            let g = c.tom.geometry().clone();
            let all: Vec<Streamline> = spans.iter()
                .filter(|(a, b)| (a - b).abs() > 1e-3)
                .map(|&(a, b)| line(a, b))
                .collect();
            let t = Tractogram::new(all.clone(), g.clone());
            let once = filter_streamlines(&t, &c, min_len);
            let twice = filter_streamlines(&once, &c, min_len);
            prop_assert_eq!(&once.streamlines, &twice.streamlines);

            let subset: Vec<Streamline> = all.iter().zip(&keep_mask).filter(|(_, k)| **k).map(|(s, _)| s.clone()).collect();
            let sub_kept = filter_streamlines(&Tractogram::new(subset, g), &c, min_len);
            for s in &sub_kept.streamlines {
                prop_assert!(once.streamlines.contains(s));
            }
        }
    }
}
