use crate::geometry::{BinaryMask, GridGeometry};
use crate::streamlines::Tractogram;
use crate::Vec3;

/// Maximum spacing (voxels) between samples taken along a segment.
pub const VOXELIZE_SAMPLE_STEP: f64 = 0.5;

/// Sample positions along the segment `a`→`b` (voxel coordinates), at most
/// [`VOXELIZE_SAMPLE_STEP`] apart, endpoints included. The samples are
/// bit-identical for `b`→`a`, in reverse order.
pub fn segment_samples(a: Vec3, b: Vec3) -> impl Iterator<Item = Vec3> {
    let d = b - a;
    let steps = ((d.norm() / VOXELIZE_SAMPLE_STEP).ceil() as usize).max(1);
    (0..=steps).map(move |k| {
        // measure from the nearer end so both directions round alike
        match (2 * k).cmp(&steps) {
            std::cmp::Ordering::Less => a + d * (k as f64 / steps as f64),
            std::cmp::Ordering::Equal => (a + b) * 0.5,
            std::cmp::Ordering::Greater => b - d * ((steps - k) as f64 / steps as f64),
        }
    })
}

/// Calls `f` with the linear index of every voxel hit by [`segment_samples`].
/// A voxel may be reported more than once; samples outside the grid are skipped.
pub fn for_each_segment_voxel(geom: &GridGeometry, a: Vec3, b: Vec3, mut f: impl FnMut(usize)) {
    for p in segment_samples(a, b) {
        if let Some(ijk) = geom.nearest_voxel(p) {
            f(geom.index(ijk));
        }
    }
}

/// `true` when every sample of the segment `a`→`b` (voxel coordinates) lies
/// in a set voxel of `mask`, so voxelizing the segment stays inside it.
pub fn segment_in_mask(mask: &BinaryMask, a: Vec3, b: Vec3) -> bool {
    segment_samples(a, b).all(|p| mask.contains_voxel_pos(p))
}

/// Sets every voxel that at least one streamline runs through.
pub fn voxelize(t: &Tractogram) -> BinaryMask {
    let geom = &t.geometry;
    let mut mask = BinaryMask::empty(geom.clone());
    for s in &t.streamlines {
        let vox: Vec<Vec3> = s.points().iter().map(|&p| geom.world_to_voxel(p)).collect();
        if vox.len() == 1 {
            if let Some(ijk) = geom.nearest_voxel(vox[0]) {
                mask.set(ijk, true);
            }
        }
        for w in vox.windows(2) {
            for_each_segment_voxel(geom, w[0], w[1], |i| mask.set_index(i, true));
        }
    }
    mask
}
