use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Units;

#[derive(Debug, Parser)]
#[command(
    name = "csdf",
    version,
    about = "Certified weak signed distance fields, rendering and meshing for voxel occupancy grids"
)]
pub struct Cli {
    /// Config file of `key = value` lines; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores); 1 guarantees byte-identical reruns
    #[arg(long, global = true, env = "CSDF_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian-smooth an occupancy grid
    Smooth(SmoothArgs),
    /// Weak SDF of an occupancy grid, with optional axis-cut images
    Sdf(SdfArgs),
    /// Monte-Carlo certificates at probe points, as CSV
    #[command(name = "certify-mc")]
    CertifyMc(CertifyArgs),
    /// Render an occupancy grid from a camera file
    Render(RenderArgs),
    /// Extract an isosurface mesh from a weak SDF grid
    Mesh(MeshArgs),
    /// Compare images or meshes
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Fit an occupancy grid to posed images
    Fit(FitArgs),
    /// Write analytic test grids and synthetic scenes
    #[command(name = "make-fixture", subcommand)]
    MakeFixture(FixtureCommand),
    /// Exact reference fields for testing
    #[command(hide = true, subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SmoothingFlags {
    /// Gaussian width [default: 1.1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Units of --sigma [default: voxel]
    #[arg(long, value_enum)]
    pub sigma_units: Option<Units>,
    /// Kernel half-width in multiples of sigma [default: 4]
    #[arg(long)]
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TransferFlags {
    /// Sigmoid sharpness [default: 19]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Density scale [default: 30]
    #[arg(long)]
    pub density_scale: Option<f64>,
    /// Offset keeping the density log finite [default: 0.001]
    #[arg(long)]
    pub eps_d: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RenderFlags {
    /// Ray-march step in world units [default: half the grid spacing]
    #[arg(long)]
    pub step: Option<f64>,
    /// Surface color as r,g,b in [0, 1] [default: 0,0,0]
    #[arg(long, value_parser = parse_triple)]
    pub albedo: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Occupancy grid
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub smoothing: SmoothingFlags,
    /// Write the plain-text grid variant
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Ppm,
    Png,
}

#[derive(Debug, Args)]
pub struct SdfArgs {
    /// Occupancy grid
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub smoothing: SmoothingFlags,
    /// Probability clamp before the inverse normal CDF [default: 1e-6]
    #[arg(long)]
    pub eps_p: Option<f64>,
    /// Threshold the input at 0.5 first, so the result is a guaranteed bound
    #[arg(long)]
    pub binarize: bool,
    /// Directory for color-mapped cuts through the grid center along x, y and z
    #[arg(long, value_name = "DIR")]
    pub slices: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "png")]
    pub slice_format: ImageFormat,
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Occupancy grid (binarized at 0.5 for classification)
    pub input: PathBuf,
    /// Text file of probe points, one `x y z` triple per line
    #[arg(long)]
    pub probes: PathBuf,
    /// CSV report path [default: stdout]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Noise samples per probe [default: 100000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Failure probability of the confidence bound [default: 0.001]
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps_p: Option<f64>,
    #[command(flatten)]
    pub smoothing: SmoothingFlags,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Occupancy grid
    pub input: PathBuf,
    /// Camera file
    #[arg(long)]
    pub camera: PathBuf,
    /// Color image; `.ppm` or `.png`
    #[arg(long, short)]
    pub out: PathBuf,
    /// 16-bit depth PNG
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Raw little-endian f32 depth, +inf where nothing was hit
    #[arg(long)]
    pub depth_raw: Option<PathBuf>,
    #[command(flatten)]
    pub smoothing: SmoothingFlags,
    #[command(flatten)]
    pub transfer: TransferFlags,
    #[command(flatten)]
    pub render: RenderFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeshFormatArg {
    Obj,
    Ply,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Weak SDF grid
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Level to extract [default: -0.1]
    #[arg(long, allow_hyphen_values = true)]
    pub isovalue: Option<f64>,
    /// Units of --isovalue [default: voxel]
    #[arg(long, value_enum)]
    pub isovalue_units: Option<Units>,
    /// Output format [default: from the extension of --out]
    #[arg(long, value_enum)]
    pub format: Option<MeshFormatArg>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// PSNR between two images of equal size
    Psnr {
        a: PathBuf,
        b: PathBuf,
        /// CSV report path [default: stdout]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Chamfer distance between surface samples of two meshes
    Chamfer {
        a: PathBuf,
        b: PathBuf,
        /// Points sampled per mesh [default: 10000]
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use nearest distances instead of their squares
        #[arg(long)]
        root: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Scene directory: `*.cam` files with same-named `.ppm`/`.png` targets, or a transforms.json
    pub scene: PathBuf,
    /// Fitted occupancy grid
    #[arg(long, short)]
    pub out: PathBuf,
    /// Scene directory of views scored after fitting
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Starting grid [default: uniform --init value on --dims/--bounds]
    #[arg(long)]
    pub init_grid: Option<PathBuf>,
    /// Uniform starting occupancy [default: 0.5]
    #[arg(long)]
    pub init: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub dims: usize,
    /// Cubic domain as min,max
    #[arg(long, value_parser = parse_pair, default_value = "-0.5,0.5", allow_hyphen_values = true)]
    pub bounds: [f64; 2],
    /// Iterations [default: 500]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Initial largest per-voxel change per step [default: 0.1]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Rays per step [default: all]
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-iteration loss as CSV, followed by summary lines
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub smoothing: SmoothingFlags,
    #[command(flatten)]
    pub transfer: TransferFlags,
    #[command(flatten)]
    pub render: RenderFlags,
}

#[derive(Debug, Clone, Args)]
pub struct LayoutFlags {
    /// Voxels per axis
    #[arg(long, default_value_t = 64)]
    pub dims: usize,
    /// Cubic domain as min,max
    #[arg(long, value_parser = parse_pair, default_value = "-0.5,0.5", allow_hyphen_values = true)]
    pub bounds: [f64; 2],
}

#[derive(Debug, Subcommand)]
pub enum FixtureCommand {
    /// Binary occupancy of a sphere
    Sphere {
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
        center: [f64; 3],
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[command(flatten)]
        layout: LayoutFlags,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Binary occupancy of an axis-aligned box
    Box {
        #[arg(long, value_parser = parse_triple, default_value = "-0.25,-0.2,-0.15", allow_hyphen_values = true)]
        min: [f64; 3],
        #[arg(long, value_parser = parse_triple, default_value = "0.2,0.25,0.3", allow_hyphen_values = true)]
        max: [f64; 3],
        #[command(flatten)]
        layout: LayoutFlags,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Binary occupancy of the halfspace `n·x ≥ offset`
    Halfspace {
        #[arg(long, value_parser = parse_triple, default_value = "0,0,1", allow_hyphen_values = true)]
        normal: [f64; 3],
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset: f64,
        #[command(flatten)]
        layout: LayoutFlags,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Posed renders of a sphere for `fit`: training views plus a `heldout` subdirectory
    Scene {
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        /// Resolution of the grid the targets are rendered from
        #[arg(long, default_value_t = 32)]
        dims: usize,
        /// Training views, placed at cube-corner directions first
        #[arg(long, default_value_t = 8)]
        views: usize,
        #[arg(long, default_value_t = 2)]
        heldout: usize,
        /// Image width and height in pixels
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        smoothing: SmoothingFlags,
        #[command(flatten)]
        transfer: TransferFlags,
        #[command(flatten)]
        render: RenderFlags,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact signed Euclidean distance transform of a binarized grid
    Edt {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Analytic signed distance of a sphere sampled at voxel centers
    SphereSdf {
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
        center: [f64; 3],
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[command(flatten)]
        layout: LayoutFlags,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list::<3>(s)
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_list::<2>(s)
}
