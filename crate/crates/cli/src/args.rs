use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use dimprofile::pointcloud::DEFAULT_POINT_BUDGET;

pub const DEFAULT_LEVELS: usize = 10;
pub const MAX_LEVELS: usize = 60;

#[derive(Debug, Parser)]
#[command(
    name = "dimprofile",
    version,
    about = "Box-counting dimension profiles of point clouds via capacities"
)]
pub struct Cli {
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,

    /// Report format; csv is available for sweep tables (profile, verify, sandwich).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a fixture point cloud as CSV.
    Gen(GenArgs),
    /// Equilibrium measure and capacity at one kernel exponent and scale.
    Capacity(CapacityArgs),
    /// Mesh-count box dimension estimate.
    Boxdim(BoxdimArgs),
    /// Capacity sweeps and s-box dimension profile estimates.
    Profile(ProfileArgs),
    /// Profile estimates plus the inequalities between them.
    Verify(ProfileArgs),
    /// Box dimensions of projections onto random subspaces against the profile.
    Project(ProjectArgs),
    /// Box dimensions of fractional Brownian images against the profile prediction.
    Fbm(FbmArgs),
    /// Box dimension of the radial snowflake image against the Hölder upper bound.
    Holder(HolderArgs),
    /// Covering numbers against capacities for s at least the ambient dimension.
    Sandwich(SandwichArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
}

#[derive(Debug, Args, Serialize)]
pub struct GenOutput {
    /// CSV file for the generated points.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Maximum number of points to generate.
    #[arg(long, default_value_t = DEFAULT_POINT_BUDGET, value_parser = positive_count)]
    pub budget: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GenKind {
    /// Lattice of side^n points in the unit cube.
    Grid {
        #[arg(long, value_parser = positive_count)]
        n: usize,
        #[arg(long, value_parser = side_count)]
        side: usize,
        #[command(flatten)]
        #[serde(flatten)]
        output: GenOutput,
    },
    /// Level-k left endpoints of the two-map Cantor set.
    Cantor {
        #[arg(long, value_parser = contraction_ratio)]
        ratio: f64,
        #[arg(long, value_parser = cantor_level)]
        level: u32,
        #[command(flatten)]
        #[serde(flatten)]
        output: GenOutput,
    },
    /// Depth-k images of the origin under the four corner maps of the unit square.
    FourCorner {
        #[arg(long, default_value_t = 0.25, value_parser = contraction_ratio)]
        ratio: f64,
        #[arg(long, value_parser = cantor_level)]
        depth: u32,
        #[command(flatten)]
        #[serde(flatten)]
        output: GenOutput,
    },
    /// Equally spaced points on the unit circle.
    Circle {
        #[arg(long, value_parser = positive_count)]
        count: usize,
        #[command(flatten)]
        #[serde(flatten)]
        output: GenOutput,
    },
    /// Cartesian product of two CSV clouds.
    Product {
        #[arg(long, value_name = "PATH")]
        left: PathBuf,
        #[arg(long, value_name = "PATH")]
        right: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        output: GenOutput,
    },
}

/// Largest scale of a dyadic grid: `auto` is the diameter of the cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RMax {
    Auto,
    Value(f64),
}

impl Serialize for RMax {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RMax::Auto => s.serialize_str("auto"),
            RMax::Value(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Largest scale, or `auto` for the diameter of the cloud.
    #[arg(long, default_value = "auto", value_parser = r_max)]
    pub r_max: RMax,
    /// Number of dyadic scales.
    #[arg(long, default_value_t = DEFAULT_LEVELS, value_parser = levels)]
    pub levels: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImageGridArgs {
    /// Largest image scale, or `auto` for the diameter of the first image.
    #[arg(long = "image-r-max", default_value = "auto", value_parser = r_max)]
    pub image_r_max: RMax,
    /// Number of dyadic image scales.
    #[arg(long = "image-levels", default_value_t = DEFAULT_LEVELS, value_parser = levels)]
    pub image_levels: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepSolverArgs {
    /// Duality-gap tolerance of each equilibrium solve.
    #[arg(long, default_value_t = 1e-4, value_parser = open_unit)]
    pub tol: f64,
    /// Iteration cap per solve; defaults to a multiple of the cloud size.
    #[arg(long, value_parser = positive_count)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CapacityArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_parser = positive)]
    pub s: f64,
    #[arg(long, value_parser = positive)]
    pub r: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = open_unit)]
    pub tol: f64,
    #[arg(long, value_parser = positive_count)]
    pub max_iter: Option<usize>,
    /// Include the equilibrium weights in the report.
    #[arg(long)]
    pub weights: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BoxdimArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Kernel exponents, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = positive)]
    pub s: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SweepSolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SandwichArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Kernel exponent; defaults to the ambient dimension.
    #[arg(long, value_parser = positive)]
    pub s: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SweepSolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Dimension of the sampled subspaces.
    #[arg(long, default_value_t = 1, value_parser = positive_count)]
    pub m: usize,
    #[arg(long, default_value_t = 30, value_parser = subspace_count)]
    pub num_subspaces: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SweepSolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FbmArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// fBm index in (0, 1).
    #[arg(long, value_parser = fbm_index)]
    pub alpha: f64,
    /// Target dimension of the image.
    #[arg(long, default_value_t = 1, value_parser = positive_count)]
    pub m: usize,
    /// Number of seeds averaged, starting at `--seed`.
    #[arg(long, default_value_t = 10, value_parser = positive_count)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub image_grid: ImageGridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SweepSolverArgs,
    /// CSV dump of the image for the first seed.
    #[arg(long, value_name = "PATH")]
    pub image_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HolderArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Hölder exponent in (0, 1].
    #[arg(long, value_parser = holder_exponent)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub image_grid: ImageGridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SweepSolverArgs,
    #[arg(long, value_name = "PATH")]
    pub image_out: Option<PathBuf>,
}

fn number(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = number(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be positive"))
    }
}

fn open_unit(v: &str) -> Result<f64, String> {
    let x = number(v)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} must lie in (0, 1)"))
    }
}

fn fbm_index(v: &str) -> Result<f64, String> {
    open_unit(v)
}

fn holder_exponent(v: &str) -> Result<f64, String> {
    let x = number(v)?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} must lie in (0, 1]"))
    }
}

fn contraction_ratio(v: &str) -> Result<f64, String> {
    let x = number(v)?;
    if x > 0.0 && x <= 0.5 {
        Ok(x)
    } else {
        Err(format!("{x} must lie in (0, 1/2]"))
    }
}

fn r_max(v: &str) -> Result<RMax, String> {
    if v.trim() == "auto" {
        Ok(RMax::Auto)
    } else {
        positive(v).map(RMax::Value)
    }
}

fn count(v: &str) -> Result<usize, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn positive_count(v: &str) -> Result<usize, String> {
    match count(v)? {
        0 => Err("must be at least 1".into()),
        k => Ok(k),
    }
}

fn side_count(v: &str) -> Result<usize, String> {
    match count(v)? {
        k if k >= 2 => Ok(k),
        _ => Err("side count must be at least 2".into()),
    }
}

fn levels(v: &str) -> Result<usize, String> {
    match count(v)? {
        k if (2..=MAX_LEVELS).contains(&k) => Ok(k),
        _ => Err(format!("levels must lie in 2..={MAX_LEVELS}")),
    }
}

fn cantor_level(v: &str) -> Result<u32, String> {
    match count(v)? {
        k if k <= 64 => Ok(k as u32),
        _ => Err("level must be at most 64".into()),
    }
}

fn subspace_count(v: &str) -> Result<usize, String> {
    match count(v)? {
        k if k >= dimprofile::projection::MIN_SUBSPACES => Ok(k),
        _ => Err(format!(
            "at least {} subspaces are needed",
            dimprofile::projection::MIN_SUBSPACES
        )),
    }
}
