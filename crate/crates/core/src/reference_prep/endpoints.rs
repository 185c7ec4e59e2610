use crate::error::{Error, Result};
use crate::geometry::{close, dilate, BinaryMask};
use crate::reference_prep::{dbscan, ClusterParams};
use crate::streamlines::Tractogram;
use crate::Vec3;

/// Start and end region masks of a tract. Disjoint and nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointRegions {
    pub start: BinaryMask,
    pub end: BinaryMask,
}

/// Evenly strided subset of `0..n` with at most `k` indices.
fn stride_indices(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

fn nearest(train: &[(Vec3, usize)], p: &Vec3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (q, label) in train {
        let d = (q - p).norm_squared();
        if d < best.0 {
            best = (d, *label);
        }
    }
    best.1
}

/// `true` when `a` precedes `b` in (z, y, x) order.
pub(crate) fn zyx_less(a: &Vec3, b: &Vec3) -> bool {
    (a.z, a.y, a.x) < (b.z, b.y, b.x)
}

/// Splits the combined start/end points of a tract into two region masks.
///
/// First and last points of all streamlines are pooled, an evenly strided
/// subset is clustered with DBSCAN, the two largest clusters train a
/// 1-nearest-neighbour classifier that labels every endpoint, and each label
/// is voxelized, closed and dilated. The region whose centroid is smaller in
/// (z, y, x) world order becomes `start`. Voxels claimed by both regions go
/// to the one owning the nearest endpoint.
pub fn extract_endpoint_regions(
    t: &Tractogram,
    params: &ClusterParams,
    close_iters: usize,
    dilate_iters: usize,
) -> Result<EndpointRegions> {
    params.validate()?;
    if t.is_empty() {
        return Err(Error::EmptyTractogram);
    }
    // all first points, then all last points, so any stride samples both ends
    let nonempty = || t.streamlines.iter().filter(|s| !s.is_empty());
    let endpoints: Vec<Vec3> = nonempty()
        .map(|s| s.first().unwrap())
        .chain(nonempty().map(|s| s.last().unwrap()))
        .collect();

    let subset: Vec<Vec3> = stride_indices(endpoints.len(), params.subset_size)
        .into_iter()
        .map(|i| endpoints[i])
        .collect();
    let labels = dbscan(&subset, params.dbscan_eps, params.dbscan_min_pts);
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    if n_clusters < 2 {
        return Err(Error::InseparableEndpointRegions { clusters: n_clusters });
    }
    let mut sizes: Vec<(usize, i64)> = (0..n_clusters as i64)
        .map(|c| (labels.iter().filter(|&&l| l == c).count(), c))
        .collect();
    // largest first, lower cluster id on ties
    sizes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let keep = [sizes[0].1, sizes[1].1];

    let train: Vec<(Vec3, usize)> = subset
        .iter()
        .zip(&labels)
        .filter_map(|(p, l)| keep.iter().position(|k| k == l).map(|side| (*p, side)))
        .collect();
    let side_of: Vec<usize> = endpoints.iter().map(|p| nearest(&train, p)).collect();

    let centroid = |side: usize| -> Vec3 {
        let (sum, n) = endpoints
            .iter()
            .zip(&side_of)
            .filter(|(_, &s)| s == side)
            .fold((Vec3::zeros(), 0usize), |(acc, n), (p, _)| (acc + p, n + 1));
        sum / n.max(1) as f64
    };
    let start_side = if zyx_less(&centroid(1), &centroid(0)) { 1 } else { 0 };

    let geom = &t.geometry;
    let mut masks = [BinaryMask::empty(geom.clone()), BinaryMask::empty(geom.clone())];
    for (p, &side) in endpoints.iter().zip(&side_of) {
        if let Some(ijk) = geom.nearest_voxel_world(*p) {
            masks[side].set(ijk, true);
        }
    }
    let mut masks = masks.map(|m| dilate(&close(&m, close_iters), dilate_iters));

    for i in 0..geom.n_voxels() {
        if masks[0].get_index(i) && masks[1].get_index(i) {
            let ijk = geom.ijk(i);
            let center = geom.voxel_to_world(Vec3::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64));
            let owner = nearest_side(&endpoints, &side_of, &center);
            masks[1 - owner].set_index(i, false);
        }
    }
    if masks.iter().any(|m| m.is_empty()) {
        return Err(Error::InvalidParameter("an endpoint region lies entirely outside the grid".into()));
    }
    let [a, b] = masks;
    let (start, end) = if start_side == 0 { (a, b) } else { (b, a) };
    Ok(EndpointRegions { start, end })
}

fn nearest_side(endpoints: &[Vec3], side_of: &[usize], p: &Vec3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (q, &s) in endpoints.iter().zip(side_of) {
        let d = (q - p).norm_squared();
        if d < best.0 {
            best = (d, s);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridGeometry;
    use crate::streamlines::Streamline;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> GridGeometry {
        GridGeometry::centered_isotropic([40, 40, 40], 2.0).unwrap()
    }

    #[test]
    fn stride_subsampling() {
        assert_eq!(stride_indices(5, 10), vec![0, 1, 2, 3, 4]);
        assert_eq!(stride_indices(10, 5), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn straight_bundle_splits_into_two_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let streamlines: Vec<Streamline> = (0..200)
            .map(|i| {
                let (y, z) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
                let (a, b) = (Vec3::new(-25.0, y, z), Vec3::new(25.0, y, z));
                // alternate direction: streamlines carry no orientation
                let pts = if i % 2 == 0 { vec![a, b] } else { vec![b, a] };
                Streamline::new(pts).unwrap()
            })
            .collect();
        let t = Tractogram::new(streamlines, geom());
        let params = ClusterParams::for_geometry(&t.geometry);
        let r = extract_endpoint_regions(&t, &params, 1, 1).unwrap();
        assert_eq!(r.start.intersection_count(&r.end), 0);
        assert!(!r.start.is_empty() && !r.end.is_empty());
        for s in &t.streamlines {
            let (a, b) = (s.first().unwrap(), s.last().unwrap());
            let (lo, hi) = if a.x < b.x { (a, b) } else { (b, a) };
            assert!(r.start.contains_world(lo) || r.end.contains_world(lo));
            assert!(r.start.contains_world(hi) != r.start.contains_world(lo));
        }
    }

    #[test]
    fn same_orientation_with_subset_half_the_endpoints() {
        let streamlines: Vec<Streamline> = (0..100)
            .map(|i| {
                let y = (i % 10) as f64 * 0.5;
                Streamline::new(vec![Vec3::new(-25.0, y, 0.0), Vec3::new(25.0, y, 0.0)]).unwrap()
            })
            .collect();
        let t = Tractogram::new(streamlines, geom());
        let params = ClusterParams { subset_size: 100, ..ClusterParams::for_geometry(&t.geometry) };
        let r = extract_endpoint_regions(&t, &params, 1, 1).unwrap();
        assert!(r.start.contains_world(Vec3::new(-25.0, 0.0, 0.0)));
        assert!(r.end.contains_world(Vec3::new(25.0, 0.0, 0.0)));
    }

    #[test]
    fn single_ball_is_inseparable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let streamlines: Vec<Streamline> = (0..100)
            .map(|_| {
                let a = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                Streamline::new(vec![a, a + Vec3::new(0.5, 0.5, 0.0)]).unwrap()
            })
            .collect();
        let t = Tractogram::new(streamlines, geom());
        let r = extract_endpoint_regions(&t, &ClusterParams::for_geometry(&t.geometry), 1, 1);
        assert!(matches!(r, Err(Error::InseparableEndpointRegions { clusters: 1 })));
    }

    #[test]
    fn start_is_lower_in_z_first_order() {
        let streamlines = (0..20)
            .map(|i| {
                let y = i as f64 * 0.2;
                Streamline::new(vec![Vec3::new(-20.0, y, 10.0), Vec3::new(20.0, y, -10.0)]).unwrap()
            })
            .collect();
        let t = Tractogram::new(streamlines, geom());
        let r = extract_endpoint_regions(&t, &ClusterParams::for_geometry(&t.geometry), 0, 0).unwrap();
        assert!(r.start.contains_world(Vec3::new(20.0, 0.0, -10.0)));
        assert!(r.end.contains_world(Vec3::new(-20.0, 0.0, 10.0)));
    }

    #[test]
    fn empty_tractogram_rejected() {
        let t = Tractogram::empty(geom());
        assert!(matches!(
            extract_endpoint_regions(&t, &ClusterParams::for_geometry(&t.geometry), 1, 1),
            Err(Error::EmptyTractogram)
        ));
    }
}
