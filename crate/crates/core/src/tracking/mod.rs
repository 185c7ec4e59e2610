//! Streamline propagation on tract orientation maps.
//!
//! Tracking runs in voxel space. Each step either samples a direction from a
//! Gaussian around the interpolated peak (probabilistic mode) or follows the
//! peak directly (deterministic mode), then advances a fixed step. Accepted
//! streamlines stay inside the tract mask, start and end in the two endpoint
//! regions, and reach a minimum length.

mod bundle;
mod filter;
mod flavors;
mod interpolate;
mod propagate;
mod sampling;

pub use bundle::{attempt_rng, track_bundle, track_bundle_with, BundleResult, RejectCounts};
pub use filter::{check_streamline, filter_streamlines};
pub use flavors::{fuse_prior, select_best_original_peak};
pub use interpolate::interpolate_peak;
pub use propagate::{track_streamline, RejectReason};
pub use sampling::sample_direction;

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, OrientationMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackingMode {
    #[default]
    Probabilistic,
    Deterministic,
}

/// Tracking parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Step length in voxels.
    pub step_size_vox: f64,
    /// Standard deviation of the per-component Gaussian added to the unit
    /// peak in probabilistic mode.
    pub gaussian_std: f64,
    pub min_length_mm: f64,
    /// Number of accepted streamlines to produce.
    pub target_count: usize,
    /// Step cap per tracking direction.
    pub max_steps: usize,
    /// Attempts are capped at `max_attempt_factor * target_count`.
    pub max_attempt_factor: usize,
    /// Interpolated peaks shorter than this end a streamline.
    pub peak_eps: f64,
    pub master_seed: u64,
    pub mode: TrackingMode,
    /// Spline-smooth accepted streamlines.
    pub smooth: bool,
    /// Smoothing budget per streamline point, in mm².
    pub smoothing_per_point: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            step_size_vox: 0.7,
            gaussian_std: 0.15,
            min_length_mm: 50.0,
            target_count: 2000,
            max_steps: 1000,
            max_attempt_factor: 100,
            peak_eps: 1e-6,
            master_seed: 0,
            mode: TrackingMode::Probabilistic,
            smooth: true,
            smoothing_per_point: 1.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size_vox > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be > 0, got {}", self.step_size_vox)));
        }
        if !(self.gaussian_std >= 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian std must be >= 0, got {}", self.gaussian_std)));
        }
        if self.target_count == 0 {
            return Err(Error::InvalidParameter("target count must be >= 1".into()));
        }
        if !(self.min_length_mm >= 0.0) || !(self.peak_eps >= 0.0) || !(self.smoothing_per_point >= 0.0) {
            return Err(Error::InvalidParameter(
                "min length, peak eps and smoothing must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a tracker reads: the orientation map and the three masks.
#[derive(Debug, Clone)]
pub struct TrackingContext {
    pub tom: OrientationMap,
    pub tract_mask: BinaryMask,
    pub start_mask: BinaryMask,
    pub end_mask: BinaryMask,
}

impl TrackingContext {
    pub fn new(
        tom: OrientationMap,
        tract_mask: BinaryMask,
        start_mask: BinaryMask,
        end_mask: BinaryMask,
    ) -> Result<Self> {
        let g = tom.geometry();
        g.ensure_matches(tract_mask.geometry(), "tract mask vs TOM")?;
        g.ensure_matches(start_mask.geometry(), "start mask vs TOM")?;
        g.ensure_matches(end_mask.geometry(), "end mask vs TOM")?;
        Ok(Self {
            tom,
            tract_mask,
            start_mask,
            end_mask,
        })
    }
}
