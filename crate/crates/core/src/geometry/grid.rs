use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::Vec3;

/// Relative tolerance for treating two grids as the same. Affines stored as
/// float32 in NIfTI round-trip to about this precision.
pub const GEOMETRY_TOLERANCE: f64 = 1e-6;

/// Voxel grid: dimensions, spacing and the voxel→world (RAS mm) affine.
///
/// Voxel centres sit at integer voxel coordinates. Linear voxel indices are
/// x-fastest, matching the on-disk NIfTI ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: Matrix4<f64>,
    linear_inv: Matrix3<f64>,
}

const SPACING_TOL: f64 = 1e-6;

impl GridGeometry {
    /// Builds a geometry from an affine; spacing is taken from the column
    /// norms of its 3×3 block.
    pub fn from_affine(dims: [usize; 3], affine: Matrix4<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!("dims must be positive, got {dims:?}")));
        }
        if affine.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("affine has non-finite entries".into()));
        }
        let linear = affine.fixed_view::<3, 3>(0, 0).into_owned();
        let linear_inv = linear
            .try_inverse()
            .ok_or_else(|| Error::InvalidGeometry("affine 3x3 block is singular".into()))?;
        let spacing = [
            linear.column(0).norm(),
            linear.column(1).norm(),
            linear.column(2).norm(),
        ];
        Ok(Self {
            dims,
            spacing,
            affine,
            linear_inv,
        })
    }

    /// Builds a geometry and checks the affine's column norms against `spacing`.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: Matrix4<f64>) -> Result<Self> {
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidGeometry(format!("spacing must be positive, got {spacing:?}")));
        }
        let geom = Self::from_affine(dims, affine)?;
        for (axis, (&got, &want)) in geom.spacing.iter().zip(&spacing).enumerate() {
            if (got - want).abs() > SPACING_TOL {
                return Err(Error::InvalidGeometry(format!(
                    "affine column {axis} has norm {got} but spacing is {want}"
                )));
            }
        }
        Ok(geom)
    }

    /// Axis-aligned grid with the given spacing and world position of voxel (0,0,0).
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: Vec3) -> Result<Self> {
        let mut affine = Matrix4::identity();
        for axis in 0..3 {
            affine[(axis, axis)] = spacing[axis];
            affine[(axis, 3)] = origin[axis];
        }
        Self::new(dims, spacing, affine)
    }

    /// Isotropic axis-aligned grid whose world origin is at the grid centre.
    pub fn centered_isotropic(dims: [usize; 3], spacing: f64) -> Result<Self> {
        let origin = Vec3::new(
            -(dims[0] as f64 - 1.0) * spacing / 2.0,
            -(dims[1] as f64 - 1.0) * spacing / 2.0,
            -(dims[2] as f64 - 1.0) * spacing / 2.0,
        );
        Self::axis_aligned(dims, [spacing; 3], origin)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn mean_spacing(&self) -> f64 {
        self.spacing.iter().sum::<f64>() / 3.0
    }

    pub fn affine(&self) -> &Matrix4<f64> {
        &self.affine
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn voxel_to_world(&self, p: Vec3) -> Vec3 {
        let h = self.affine * Vector4::new(p.x, p.y, p.z, 1.0);
        Vector3::new(h.x, h.y, h.z)
    }

    pub fn world_to_voxel(&self, p: Vec3) -> Vec3 {
        let t = Vector3::new(self.affine[(0, 3)], self.affine[(1, 3)], self.affine[(2, 3)]);
        self.linear_inv * (p - t)
    }

    /// Maps a world-space direction into voxel space (no translation).
    pub fn direction_to_voxel(&self, d: Vec3) -> Vec3 {
        self.linear_inv * d
    }

    /// Nearest voxel of a voxel-space position, or `None` outside the grid.
    /// Ties at half-voxel boundaries round up.
    pub fn nearest_voxel(&self, p_vox: Vec3) -> Option<[usize; 3]> {
        let mut ijk = [0usize; 3];
        for axis in 0..3 {
            let r = (p_vox[axis] + 0.5).floor();
            if !(r >= 0.0 && r < self.dims[axis] as f64) {
                return None;
            }
            ijk[axis] = r as usize;
        }
        Some(ijk)
    }

    pub fn nearest_voxel_world(&self, p_world: Vec3) -> Option<[usize; 3]> {
        self.nearest_voxel(self.world_to_voxel(p_world))
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    #[inline]
    pub fn ijk(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn contains(&self, ijk: [i64; 3]) -> bool {
        (0..3).all(|a| ijk[a] >= 0 && (ijk[a] as usize) < self.dims[a])
    }

    /// Same dims and affine equal within `tol`.
    pub fn matches(&self, other: &GridGeometry, tol: f64) -> bool {
        self.dims == other.dims
            && self
                .affine
                .iter()
                .zip(other.affine.iter())
                .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0))
    }

    pub(crate) fn ensure_matches(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.matches(other, GEOMETRY_TOLERANCE) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} vs {:?} or affines differ",
                self.dims, other.dims
            )))
        }
    }
}
