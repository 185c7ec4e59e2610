//! Voxel grids, volumes, binary morphology and NIfTI-1 I/O.

mod grid;
pub mod morphology;
pub mod nifti;
mod volume;

pub use grid::{GridGeometry, GEOMETRY_TOLERANCE};
pub use morphology::{close, dilate, morphology, MorphologyOp};
pub use volume::{prune_peaks, BinaryMask, OrientationMap, PeakImage, DEFAULT_PEAK_THRESHOLD};
