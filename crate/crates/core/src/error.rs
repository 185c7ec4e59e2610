use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the tomtrack library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid streamline: {0}")]
    InvalidStreamline(String),

    #[error("zero-length peak cannot define a direction")]
    ZeroPeak,

    #[error("zero-norm vector at element {0}")]
    ZeroNormVector(usize),

    #[error("no voxels where both orientation maps are nonzero")]
    NoComparableVoxels,

    #[error("tract mask is empty")]
    EmptyMask,

    #[error("tractogram is empty")]
    EmptyTractogram,

    #[error("inseparable endpoint regions: found {clusters} cluster(s) among subsampled endpoints")]
    InseparableEndpointRegions { clusters: usize },

    #[error("bundle does not fit inside the grid: {0}")]
    BundleExceedsGrid(String),

    #[error("bundle name sets differ: {0}")]
    BundleNameMismatch(String),

    #[error("TCK header malformed: {0}")]
    TckMalformedHeader(String),

    #[error("TCK datatype unsupported: {0}")]
    TckUnsupportedDatatype(String),

    #[error("TCK data section truncated: {0}")]
    TckTruncated(String),

    #[error("NIfTI header malformed: {0}")]
    NiftiMalformedHeader(String),

    #[error("NIfTI datatype unsupported: code {0}")]
    NiftiUnsupportedDatatype(i16),

    #[error("NIfTI data section truncated: expected {expected} bytes, found {found}")]
    NiftiTruncated { expected: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
