//! Turns reference streamlines into tracking targets: tract masks, start/end
//! region masks and tract orientation maps.

mod dbscan;
mod endpoints;
mod mean_shift;
mod tom;

pub use dbscan::{dbscan, NOISE};
pub use endpoints::{extract_endpoint_regions, EndpointRegions};
pub(crate) use endpoints::zyx_less;
pub use mean_shift::{mean_shift, Mode};
pub use tom::{extract_tom, extract_tom_with};

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;

/// Default closing iterations applied to endpoint regions.
pub const DEFAULT_CLOSE_ITERS: usize = 1;
/// Default dilation iterations applied to endpoint regions.
pub const DEFAULT_DILATE_ITERS: usize = 1;

/// Clustering parameters for endpoint splitting and orientation extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    /// DBSCAN neighbourhood radius in mm.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Endpoints are subsampled to at most this many before DBSCAN.
    pub subset_size: usize,
    /// Mean-shift bandwidth on unit direction vectors.
    pub meanshift_bandwidth: f64,
    pub meanshift_tol: f64,
    pub meanshift_merge_radius: f64,
}

impl ClusterParams {
    /// Defaults for a grid: `dbscan_eps` is three times the mean spacing.
    pub fn for_geometry(geom: &GridGeometry) -> Self {
        Self {
            dbscan_eps: 3.0 * geom.mean_spacing(),
            dbscan_min_pts: 5,
            subset_size: 1000,
            meanshift_bandwidth: 0.3,
            meanshift_tol: 1e-4,
            meanshift_merge_radius: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dbscan_eps > 0.0
            && self.dbscan_min_pts > 0
            && self.subset_size > 0
            && self.meanshift_bandwidth > 0.0
            && self.meanshift_tol > 0.0
            && self.meanshift_merge_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("cluster parameters must be positive: {self:?}")))
        }
    }
}
