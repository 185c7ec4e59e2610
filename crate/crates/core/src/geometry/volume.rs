use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::Vec3;

/// Boolean volume: a tract mask or an endpoint-region mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: GridGeometry,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.n_voxels();
        Self {
            geometry,
            data: vec![false; n],
        }
    }

    pub fn from_data(geometry: GridGeometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geometry.n_voxels() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} voxels, geometry expects {}",
                data.len(),
                geometry.n_voxels()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, ijk: [usize; 3]) -> bool {
        self.data[self.geometry.index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], value: bool) {
        let i = self.geometry.index(ijk);
        self.data[i] = value;
    }

    pub fn get_index(&self, index: usize) -> bool {
        self.data[index]
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.data[index] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Linear indices of set voxels in ascending order.
    pub fn set_indices(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Membership of the voxel nearest to a voxel-space position.
    pub fn contains_voxel_pos(&self, p_vox: Vec3) -> bool {
        self.geometry.nearest_voxel(p_vox).is_some_and(|ijk| self.get(ijk))
    }

    /// Membership of the voxel nearest to a world-space position.
    pub fn contains_world(&self, p_world: Vec3) -> bool {
        self.contains_voxel_pos(self.geometry.world_to_voxel(p_world))
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn union_with(&mut self, other: &BinaryMask) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }
}

/// Up to three peaks per voxel; absent peaks are the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakImage {
    geometry: GridGeometry,
    data: Vec<[Vec3; 3]>,
}

impl PeakImage {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.n_voxels();
        Self {
            geometry,
            data: vec![[Vec3::zeros(); 3]; n],
        }
    }

    pub fn from_data(geometry: GridGeometry, data: Vec<[Vec3; 3]>) -> Result<Self> {
        if data.len() != geometry.n_voxels() {
            return Err(Error::ShapeMismatch(format!(
                "peak image has {} voxels, geometry expects {}",
                data.len(),
                geometry.n_voxels()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[[Vec3; 3]] {
        &self.data
    }

    pub fn peaks(&self, index: usize) -> &[Vec3; 3] {
        &self.data[index]
    }

    pub fn set_peaks(&mut self, index: usize, peaks: [Vec3; 3]) {
        self.data[index] = peaks;
    }
}

/// Tract orientation map: one peak per voxel, zero meaning "no tract here".
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationMap {
    geometry: GridGeometry,
    data: Vec<Vec3>,
}

impl OrientationMap {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.n_voxels();
        Self {
            geometry,
            data: vec![Vec3::zeros(); n],
        }
    }

    pub fn from_data(geometry: GridGeometry, data: Vec<Vec3>) -> Result<Self> {
        if data.len() != geometry.n_voxels() {
            return Err(Error::ShapeMismatch(format!(
                "orientation map has {} voxels, geometry expects {}",
                data.len(),
                geometry.n_voxels()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[Vec3] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Vec3] {
        &mut self.data
    }

    pub fn get(&self, ijk: [usize; 3]) -> Vec3 {
        self.data[self.geometry.index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], v: Vec3) {
        let i = self.geometry.index(ijk);
        self.data[i] = v;
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|v| **v != Vec3::zeros()).count()
    }

    /// Mask of voxels holding a nonzero peak.
    pub fn support(&self) -> BinaryMask {
        let data = self.data.iter().map(|v| *v != Vec3::zeros()).collect();
        BinaryMask {
            geometry: self.geometry.clone(),
            data,
        }
    }
}

/// Default magnitude below which predicted peaks are discarded.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.3;

/// Zeroes every peak whose norm is strictly below `threshold`.
pub fn prune_peaks(tom: &OrientationMap, threshold: f64) -> Result<OrientationMap> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("prune threshold must be >= 0, got {threshold}")));
    }
    let data = tom
        .data
        .iter()
        .map(|v| if v.norm() < threshold { Vec3::zeros() } else { *v })
        .collect();
    Ok(OrientationMap {
        geometry: tom.geometry.clone(),
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: Vec3) -> OrientationMap {
        let g = GridGeometry::axis_aligned([1, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        OrientationMap::from_data(g, vec![v]).unwrap()
    }

    #[test]
    fn short_peak_is_discarded() {
        let out = prune_peaks(&single(Vec3::new(0.2, 0.0, 0.0)), 0.3).unwrap();
        assert_eq!(out.data()[0], Vec3::zeros());
    }

    #[test]
    fn boundary_peak_survives() {
        let out = prune_peaks(&single(Vec3::new(0.3, 0.0, 0.0)), 0.3).unwrap();
        assert_eq!(out.data()[0], Vec3::new(0.3, 0.0, 0.0));
    }

    #[test]
    fn zero_threshold_is_identity() {
        let m = single(Vec3::new(1e-9, 0.0, 0.0));
        assert_eq!(prune_peaks(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn prune_is_idempotent() {
        let g = GridGeometry::axis_aligned([5, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        let data = (0..5).map(|i| Vec3::new(0.1 * i as f64, 0.05, 0.0)).collect();
        let m = OrientationMap::from_data(g, data).unwrap();
        let once = prune_peaks(&m, 0.3).unwrap();
        assert_eq!(prune_peaks(&once, 0.3).unwrap(), once);
        assert!(prune_peaks(&m, -1.0).is_err());
    }

    #[test]
    fn shape_checked() {
        let g = GridGeometry::axis_aligned([2, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        assert!(BinaryMask::from_data(g, vec![true]).is_err());
    }
}
