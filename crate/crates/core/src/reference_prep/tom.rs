use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::OrientationMap;
use crate::par::{map_range, Execution};
use crate::reference_prep::{mean_shift, ClusterParams};
use crate::streamlines::{for_each_segment_voxel, Tractogram};
use crate::Vec3;

/// Main streamline orientation per voxel, see [`extract_tom_with`].
pub fn extract_tom(t: &Tractogram, params: &ClusterParams) -> Result<OrientationMap> {
    extract_tom_with(t, params, Execution::default())
}

/// Builds a tract orientation map from streamlines.
///
/// Each voxel gathers the unit tangents of the segments passing through it
/// (one entry per segment), flips them onto the hemisphere of the scatter
/// matrix's principal eigenvector, clusters them with mean shift and keeps
/// the normalised mean of the largest cluster. Voxels no segment reaches
/// stay zero.
pub fn extract_tom_with(t: &Tractogram, params: &ClusterParams, exec: Execution) -> Result<OrientationMap> {
    params.validate()?;
    if t.is_empty() {
        return Err(Error::EmptyTractogram);
    }
    let geom = &t.geometry;
    let mut samples: Vec<(usize, Vec3)> = Vec::new();
    let mut hit = Vec::new();
    for s in &t.streamlines {
        for w in s.points().windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            if !(len > 0.0) {
                continue;
            }
            let dir = d / len;
            hit.clear();
            for_each_segment_voxel(geom, geom.world_to_voxel(w[0]), geom.world_to_voxel(w[1]), |i| hit.push(i));
            hit.sort_unstable();
            hit.dedup();
            samples.extend(hit.iter().map(|&i| (i, dir)));
        }
    }
    samples.sort_by_key(|(i, _)| *i);

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=samples.len() {
        if k == samples.len() || samples[k].0 != samples[start].0 {
            groups.push((start, k));
            start = k;
        }
    }

    let peaks = map_range(0..groups.len() as u64, exec, |g| {
        let (a, b) = groups[g as usize];
        let dirs: Vec<Vec3> = samples[a..b].iter().map(|(_, d)| *d).collect();
        (samples[a].0, voxel_orientation(&dirs, params))
    });

    let mut tom = OrientationMap::zeros(geom.clone());
    for (i, v) in peaks {
        tom.data_mut()[i] = v;
    }
    Ok(tom)
}

/// Dominant axial orientation of a set of unit vectors.
fn voxel_orientation(dirs: &[Vec3], params: &ClusterParams) -> Vec3 {
    let scatter: Matrix3<f64> = dirs.iter().map(|d| d * d.transpose()).sum();
    let eig = SymmetricEigen::new(scatter);
    let imax = eig.eigenvalues.imax();
    let axis: Vec3 = eig.eigenvectors.column(imax).into_owned();
    let mut canonical: Vec<Vec3> = dirs
        .iter()
        .map(|d| if d.dot(&axis) < 0.0 { -d } else { *d })
        .collect();
    // input order must not influence mode merging or tie-breaking
    canonical.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    let modes = mean_shift(
        &canonical,
        params.meanshift_bandwidth,
        params.meanshift_tol,
        params.meanshift_merge_radius,
    );
    // first mode wins ties
    let best = modes
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.count().cmp(&b.count()).then(ib.cmp(ia)))
        .map(|(_, m)| m)
        .expect("at least one direction");
    let mean: Vec3 = best.members.iter().map(|&i| canonical[i]).sum();
    let n = mean.norm();
    if n > 0.0 {
        mean / n
    } else {
        Vec3::zeros()
    }
}
