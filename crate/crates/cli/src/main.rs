use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod settings;

/// Exposure-compensated multi-exposure fusion.
#[derive(Parser)]
#[command(name = "expofuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adjust and fuse an exposure stack into one image
    Fuse(FuseArgs),
    /// Print entropy, statistical naturalness and well-exposedness of images
    Metrics(MetricsArgs),
    /// Render a synthetic exposure stack with an EV sidecar
    Synth(SynthArgs),
    /// Check that a stack scales linearly with exposure time
    CheckLinear(CheckLinearArgs),
    /// Write the pixelwise-max well-exposedness map of a stack
    Wellexposedness(WellArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Simple,
    Mertens,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Blend {
    Naive,
    Pyramid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Gamut {
    /// Clamp silently.
    Clip,
    /// Clamp and report the number of out-of-range pixels.
    Warn,
    /// Fail when any pixel is out of range.
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl From<Depth> for expofuse::BitDepth {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Eight => expofuse::BitDepth::Eight,
            Depth::Sixteen => expofuse::BitDepth::Sixteen,
        }
    }
}

#[derive(Args)]
pub struct FuseArgs {
    /// Input exposures (any order)
    inputs: Vec<PathBuf>,

    #[arg(long, short)]
    out: PathBuf,

    /// EV sidecar (`name ev` lines); with no inputs, the listed files are fused
    #[arg(long)]
    evs: Option<PathBuf>,

    /// key=value file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_enum)]
    weights: Option<Weights>,

    #[arg(long, value_enum)]
    blend: Option<Blend>,

    /// Pyramid depth, a number or `auto`
    #[arg(long)]
    levels: Option<String>,

    /// Fuse the inputs as they are
    #[arg(long)]
    no_adjust: bool,

    /// Bilateral spatial sigma in pixels [default: 16]
    #[arg(long)]
    sigma_spatial: Option<f64>,

    /// Bilateral range sigma [default: 3/255]
    #[arg(long)]
    sigma_range: Option<f64>,

    /// Luminance floor for the geometric mean [default: 1e-6]
    #[arg(long)]
    epsilon: Option<f64>,

    /// Target geometric-mean luminance [default: 0.18]
    #[arg(long)]
    target_gray: Option<f64>,

    /// Inputs are sRGB encoded; decode on read and encode on write (default)
    #[arg(long, conflicts_with = "linear")]
    assume_srgb: bool,

    /// Inputs hold linear values; no transfer curve on read or write
    #[arg(long)]
    linear: bool,

    /// Use the whole image as the bilateral window
    #[arg(long)]
    exact_bilateral: bool,

    /// Write luminance stages, weights and gains here
    #[arg(long)]
    dump_intermediates: Option<PathBuf>,

    /// Write the quality report as JSON
    #[arg(long)]
    report: Option<PathBuf>,

    /// Worker threads [default: available cores]
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long, value_enum)]
    gamut: Option<Gamut>,

    #[arg(long, value_enum)]
    bit_depth: Option<Depth>,
}

#[derive(Args)]
pub struct MetricsArgs {
    #[arg(required = true)]
    images: Vec<PathBuf>,

    /// One CSV row per image
    #[arg(long)]
    csv: bool,

    /// Write to a file instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene name (ramp, bimodal, checker, sunset, lamp, courtyard)
    scene: String,

    /// Comma-separated exposure values
    #[arg(long, default_value = "-1,0,1", allow_hyphen_values = true)]
    evs: String,

    /// linear, gamma:G or saturating:S
    #[arg(long, default_value = "linear")]
    crf: String,

    /// N or WxH
    #[arg(long, default_value = "256")]
    size: String,

    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// File name prefix [default: scene name]
    #[arg(long)]
    prefix: Option<String>,

    #[arg(long, default_value = "png")]
    format: String,

    #[arg(long, value_enum, default_value = "8")]
    bit_depth: Depth,

    /// Store sRGB-encoded codes instead of the camera response directly
    #[arg(long)]
    srgb: bool,
}

#[derive(Args)]
pub struct CheckLinearArgs {
    /// EV sidecar; image names resolve relative to it
    sidecar: PathBuf,

    /// Extra absolute tolerance on top of the quantization bound
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,

    /// Decode the sRGB curve before checking
    #[arg(long)]
    assume_srgb: bool,
}

#[derive(Args)]
pub struct WellArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    #[arg(long, short)]
    out: PathBuf,

    #[arg(long, value_enum, default_value = "8")]
    bit_depth: Depth,
}

/// Bad invocation; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command {
        Command::Fuse(args) => commands::fuse(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::Synth(args) => commands::synth(args),
        Command::CheckLinear(args) => commands::check_linear(args),
        Command::Wellexposedness(args) => commands::wellexposedness(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
