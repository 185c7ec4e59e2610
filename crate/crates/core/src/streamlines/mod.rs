//! Streamlines, tractograms, TCK I/O, spline smoothing and voxelization.

pub mod spline;
pub mod tck;
mod voxelize;

pub use spline::{smooth_bspline, CubicSmoothingSpline};
pub use tck::{read_tck, read_tck_streamlines, write_tck, write_tck_streamlines};
pub use voxelize::{for_each_segment_voxel, segment_in_mask, segment_samples, voxelize, VOXELIZE_SAMPLE_STEP};

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::Vec3;

/// A polyline in world millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    points: Vec<Vec3>,
}

impl Streamline {
    /// Validates at least two points and distinct consecutive points.
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidStreamline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidStreamline(format!("points {i} and {} coincide", i + 1)));
        }
        Ok(Self { points })
    }

    /// Wraps points as read from disk without validation.
    pub fn from_raw(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<Vec3> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<Vec3> {
        self.points.last().copied()
    }

    pub fn arc_length(&self) -> f64 {
        arc_length(&self.points)
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

/// Sum of Euclidean segment lengths.
pub fn arc_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Streamlines of one tract plus the grid used for voxel-space operations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tractogram {
    pub streamlines: Vec<Streamline>,
    pub geometry: GridGeometry,
}

impl Tractogram {
    pub fn new(streamlines: Vec<Streamline>, geometry: GridGeometry) -> Self {
        Self {
            streamlines,
            geometry,
        }
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        Self::new(Vec::new(), geometry)
    }

    pub fn len(&self) -> usize {
        self.streamlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streamlines.is_empty()
    }
}
