//! Bundle-specific tractography on tract orientation maps (TOMs).
//!
//! The crate tracks streamlines on a map holding one peak per voxel for a
//! single tract, constrains them by a tract mask and start/end region masks,
//! and ships the tooling around that: reference-target preparation from
//! streamlines, evaluation metrics, NIfTI/TCK I/O and an analytic phantom.
//!
//! Bundle tracking and per-voxel TOM extraction run on rayon when the
//! `parallel` feature is enabled (the default). Results never depend on the
//! number of worker threads.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod reference_prep;
pub mod streamlines;
pub mod tracking;

pub use error::{Error, Result};

/// Three-component vector used for positions (mm or voxels) and directions.
pub type Vec3 = nalgebra::Vector3<f64>;
