use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bundle-specific tractography on tract orientation maps (TOMs).
///
/// Every option may also be given in a `--config` file as `key = value`, where
/// `key` is the long flag name without dashes. Command-line flags win.
#[derive(Debug, Parser)]
#[command(name = "tomtrack", version, args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file supplying option values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker thread cap (falls back to TOMTRACK_THREADS); output does not depend on it
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic bundle with ground-truth TOM, masks and endpoint regions
    Phantom(PhantomArgs),
    /// Voxelize a TCK tractogram into a binary tract mask
    MakeMask(MakeMaskArgs),
    /// Split streamline endpoints into start and end region masks
    MakeEndings(MakeEndingsArgs),
    /// Extract the per-voxel main streamline orientation (TOM)
    MakeTom(MakeTomArgs),
    /// Track one bundle on a TOM inside its tract mask
    Track(TrackArgs),
    /// Keep streamlines that stay in the mask, end in both regions and are long enough
    Filter(FilterArgs),
    /// Dice and angular error of predicted bundles against references
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Straight,
    Arc,
    UShape,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    #[arg(long, value_enum, default_value_t = KindArg::Straight)]
    pub kind: KindArg,

    /// Straight bundle length in mm [default: 100]
    #[arg(long)]
    pub length_mm: Option<f64>,

    /// Bend radius in mm [default: 40 for arc, 12.5 for u-shape]
    #[arg(long)]
    pub radius_mm: Option<f64>,

    /// Bend sweep in degrees [default: 90 for arc, 180 for u-shape]
    #[arg(long)]
    pub sweep_deg: Option<f64>,

    /// U-shape leg length in mm [default: 40]
    #[arg(long)]
    pub leg_length_mm: Option<f64>,

    /// Tube radius in mm [default: 5, 3.75 for u-shape]
    #[arg(long)]
    pub tube_radius_mm: Option<f64>,

    #[arg(long, default_value_t = 1000)]
    pub n_streamlines: usize,

    /// Perpendicular jitter scale in mm
    #[arg(long, default_value_t = 0.2)]
    pub jitter_mm: f64,

    /// Peak rotation scale for the perturbed TOM, degrees
    #[arg(long, default_value_t = 0.0)]
    pub noise_angle_deg: f64,

    /// Fraction of perturbed TOM voxels zeroed
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,

    /// Grid size in voxels along each axis
    #[arg(long, default_value_t = 50)]
    pub grid_size: usize,

    /// Isotropic voxel size in mm
    #[arg(long, default_value_t = 2.5)]
    pub spacing_mm: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReferenceTck {
    /// Input tractogram
    #[arg(long, value_name = "FILE")]
    pub tck: PathBuf,

    /// NIfTI image defining the output grid
    #[arg(long, value_name = "FILE")]
    pub reference: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeMaskArgs {
    #[command(flatten)]
    pub input: ReferenceTck,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeEndingsArgs {
    #[command(flatten)]
    pub input: ReferenceTck,

    #[arg(long, value_name = "FILE")]
    pub out_start: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub out_end: PathBuf,

    /// DBSCAN neighbourhood radius in mm [default: 3 x mean voxel size]
    #[arg(long)]
    pub dbscan_eps: Option<f64>,

    #[arg(long, default_value_t = 5)]
    pub dbscan_min_pts: usize,

    /// Endpoints clustered before classification
    #[arg(long, default_value_t = 1000)]
    pub subset_size: usize,

    #[arg(long, default_value_t = 1)]
    pub close_iters: usize,

    #[arg(long, default_value_t = 1)]
    pub dilate_iters: usize,
}

#[derive(Debug, Args)]
pub struct MakeTomArgs {
    #[command(flatten)]
    pub input: ReferenceTck,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Mean-shift bandwidth on unit vectors
    #[arg(long, default_value_t = 0.3)]
    pub bandwidth: f64,

    /// Mean-shift convergence tolerance
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,

    /// Distance under which converged modes merge
    #[arg(long, default_value_t = 0.1)]
    pub merge_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    /// Track on the TOM peaks
    Direct,
    /// Track on the original peak closest to the TOM
    BestOrig,
    /// Track on a weighted mean of TOM and closest original peak
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Probabilistic,
    Deterministic,
}

#[derive(Debug, Args)]
pub struct Regions {
    /// Tract mask
    #[arg(long, value_name = "FILE")]
    pub mask: PathBuf,

    /// Start region mask
    #[arg(long, value_name = "FILE")]
    pub start: PathBuf,

    /// End region mask
    #[arg(long, value_name = "FILE")]
    pub end: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Tract orientation map (3 channels)
    #[arg(long, value_name = "FILE")]
    pub tom: PathBuf,

    #[command(flatten)]
    pub regions: Regions,

    /// Output tractogram
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = FlavorArg::Direct)]
    pub flavor: FlavorArg,

    /// Original peaks (9 channels); required for best-orig and fused
    #[arg(long, value_name = "FILE")]
    pub peaks: Option<PathBuf>,

    /// TOM weight in the fused flavor
    #[arg(long, default_value_t = 0.5)]
    pub prior_weight: f64,

    #[arg(long, value_enum, default_value_t = ModeArg::Probabilistic)]
    pub mode: ModeArg,

    /// Step size in voxels
    #[arg(long, default_value_t = 0.7)]
    pub step_size: f64,

    /// Standard deviation of the direction noise
    #[arg(long, default_value_t = 0.15)]
    pub gaussian_std: f64,

    /// Minimum streamline length in mm
    #[arg(long, default_value_t = 50.0)]
    pub min_length: f64,

    /// Streamlines to produce
    #[arg(long, default_value_t = 2000)]
    pub target_count: usize,

    /// Step cap per direction
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,

    /// Attempts allowed per requested streamline
    #[arg(long, default_value_t = 100)]
    pub max_attempt_factor: usize,

    /// Interpolated peaks shorter than this stop a streamline
    #[arg(long, default_value_t = 1e-6)]
    pub peak_eps: f64,

    /// TOM peaks shorter than this are zeroed before tracking
    #[arg(long, default_value_t = 0.3)]
    pub peak_threshold: f64,

    /// Master seed; streamline i uses a stream derived from (seed, attempt i)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Skip spline smoothing of accepted streamlines
    #[arg(long)]
    pub no_smooth: bool,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Input tractogram
    #[arg(long, value_name = "FILE")]
    pub tck: PathBuf,

    #[command(flatten)]
    pub regions: Regions,

    /// Minimum streamline length in mm
    #[arg(long, default_value_t = 50.0)]
    pub min_length: f64,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Kv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// NAME=PRED_MASK,REF_MASK[,PRED_TOM,REF_TOM]; repeat once per bundle
    #[arg(long = "bundle", value_name = "SPEC", required = true)]
    pub bundles: Vec<String>,

    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,

    /// Also write the report to this file
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
