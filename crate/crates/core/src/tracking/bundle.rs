use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{track_streamline, RejectReason, TrackerConfig, TrackingContext};
use crate::error::{Error, Result};
use crate::par::{map_range, Execution};
use crate::streamlines::{Streamline, Tractogram};
use crate::Vec3;

/// Rejected attempts by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectCounts {
    pub too_short: u64,
    pub endpoint_not_in_regions: u64,
    pub left_mask_degenerate: u64,
    pub left_tract_mask: u64,
}

impl RejectCounts {
    fn add(&mut self, r: RejectReason) {
        match r {
            RejectReason::TooShort => self.too_short += 1,
            RejectReason::EndpointNotInRegions => self.endpoint_not_in_regions += 1,
            RejectReason::LeftMaskDegenerate => self.left_mask_degenerate += 1,
            RejectReason::LeftTractMask => self.left_tract_mask += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.too_short + self.endpoint_not_in_regions + self.left_mask_degenerate + self.left_tract_mask
    }
}

#[derive(Debug, Clone)]
pub struct BundleResult {
    pub tractogram: Tractogram,
    /// Attempts consumed, accepted or not.
    pub attempts: u64,
    pub accepted: usize,
    pub rejects: RejectCounts,
    /// Set when the attempt budget ran out before `target_count` was reached.
    pub budget_exhausted: bool,
}

/// RNG for one attempt: the ChaCha stream `attempt` under key `master_seed`.
pub fn attempt_rng(master_seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(attempt);
    rng
}

pub fn track_bundle(ctx: &TrackingContext, cfg: &TrackerConfig) -> Result<BundleResult> {
    track_bundle_with(ctx, cfg, Execution::default())
}

/// Seeds uniformly over tract-mask voxels until `target_count` streamlines are
/// accepted or `max_attempt_factor * target_count` attempts are spent.
///
/// Attempts run in fixed-size batches whose results are consumed in attempt
/// order, so the output does not depend on `exec` or the thread count.
pub fn track_bundle_with(ctx: &TrackingContext, cfg: &TrackerConfig, exec: Execution) -> Result<BundleResult> {
    cfg.validate()?;
    let voxels = ctx.tract_mask.set_indices();
    if voxels.is_empty() {
        return Err(Error::EmptyMask);
    }
    let geom = ctx.tom.geometry();
    let budget = (cfg.max_attempt_factor as u64).saturating_mul(cfg.target_count as u64);

    let run = |attempt: u64| -> std::result::Result<Streamline, RejectReason> {
        let mut rng = attempt_rng(cfg.master_seed, attempt);
        let ijk = geom.ijk(voxels[rng.random_range(0..voxels.len())]);
        let jitter = Vec3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        let seed = Vec3::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64) + jitter;
        track_streamline(ctx, seed, cfg, &mut rng)
    };

    let mut streamlines = Vec::with_capacity(cfg.target_count);
    let mut rejects = RejectCounts::default();
    let mut attempts = 0u64;
    let mut next = 0u64;
    'outer: while streamlines.len() < cfg.target_count && next < budget {
        let remaining = (cfg.target_count - streamlines.len()) as u64;
        let batch = (remaining * 2).clamp(256, 8192).min(budget - next);
        for r in map_range(next..next + batch, exec, run) {
            attempts += 1;
            match r {
                Ok(s) => {
                    streamlines.push(s);
                    if streamlines.len() == cfg.target_count {
                        break 'outer;
                    }
                }
                Err(reason) => rejects.add(reason),
            }
        }
        next += batch;
    }

    let accepted = streamlines.len();
    Ok(BundleResult {
        tractogram: Tractogram::new(streamlines, geom.clone()),
        attempts,
        accepted,
        rejects,
        budget_exhausted: accepted < cfg.target_count,
    })
}
