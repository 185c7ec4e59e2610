use std::fmt;
use std::path::{Path, PathBuf};

use tomtrack::Error as CoreError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// A failure with a stable code, the offending path when there is one, and
/// the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub path: Option<PathBuf>,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, path: None, message: message.into(), exit: EXIT_USAGE }
    }

    pub fn data(code: &'static str, path: Option<&Path>, message: impl Into<String>) -> Self {
        Self { code, path: path.map(Path::to_path_buf), message: message.into(), exit: EXIT_DATA }
    }

    /// Wraps a library error, attributing it to `path` unless it names its own.
    pub fn from_core(e: CoreError, path: Option<&Path>) -> Self {
        let (code, exit) = classify(&e);
        match e {
            CoreError::Io { path: own, source } => Self {
                code,
                path: Some(own),
                message: source.to_string(),
                exit,
            },
            other => Self {
                code,
                path: path.map(Path::to_path_buf),
                message: other.to_string(),
                exit,
            },
        }
    }
}

fn classify(e: &CoreError) -> (&'static str, i32) {
    match e {
        CoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ("E_MISSING_FILE", EXIT_DATA),
        CoreError::Io { .. } => ("E_IO", EXIT_DATA),
        CoreError::GeometryMismatch(_) | CoreError::ShapeMismatch(_) => ("E_GEOMETRY_MISMATCH", EXIT_DATA),
        CoreError::TckMalformedHeader(_)
        | CoreError::TckUnsupportedDatatype(_)
        | CoreError::TckTruncated(_)
        | CoreError::NiftiMalformedHeader(_)
        | CoreError::NiftiUnsupportedDatatype(_)
        | CoreError::NiftiTruncated { .. }
        | CoreError::InvalidStreamline(_) => ("E_PARSE", EXIT_DATA),
        CoreError::InvalidGeometry(_) => ("E_INVALID_GEOMETRY", EXIT_DATA),
        CoreError::EmptyMask => ("E_EMPTY_MASK", EXIT_DATA),
        CoreError::EmptyTractogram => ("E_EMPTY_TRACTOGRAM", EXIT_DATA),
        CoreError::InseparableEndpointRegions { .. } => ("E_INSEPARABLE_ENDPOINTS", EXIT_DATA),
        CoreError::NoComparableVoxels | CoreError::ZeroPeak | CoreError::ZeroNormVector(_) => {
            ("E_DEGENERATE_DATA", EXIT_DATA)
        }
        CoreError::BundleNameMismatch(_) => ("E_BUNDLE_MISMATCH", EXIT_DATA),
        CoreError::InvalidParameter(_) | CoreError::BundleExceedsGrid(_) => ("E_INVALID_PARAMETER", EXIT_USAGE),
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: ", self.code)?;
        if let Some(p) = &self.path {
            write!(f, "{}: ", p.display())?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
