//! `hdrkit` command-line front end.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 when the input data or
//! a processing stage fails. Diagnostics go to standard error as one line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdrkit::formats::FileFormat;
use hdrkit::layered::Mode;
use hdrkit::quality::MetricKind;
use hdrkit::tonemap::{Formula, Saturation};

#[derive(Parser, Debug)]
#[command(name = "hdrkit", version, about = "HDR imaging toolkit")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// Seed for sampled procedures.
    #[arg(long, global = true, default_value_t = 0x5EED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert between Radiance HDR, PFM and PPM.
    Convert(ConvertArgs),
    /// Print dimensions, format and luminance statistics.
    Info(InfoArgs),
    /// Merge a bracketed exposure stack into a radiance map.
    Merge(MergeArgs),
    /// Tone map an HDR image to an 8-bit PPM.
    Tonemap(TonemapArgs),
    /// Expand an 8-bit PPM into an HDR image.
    Expand(ExpandArgs),
    /// Compare a test image against a reference.
    Compare(CompareArgs),
    /// Encode an HDR image as a two-layer container.
    Pack(PackArgs),
    /// Decode a two-layer container.
    Unpack(UnpackArgs),
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Output format (hdr, pfm, ppm); defaults to the output extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
    /// Input format; defaults to the input extension.
    #[arg(long, value_parser = parse_format)]
    pub input_format: Option<FileFormat>,
    /// Write flat instead of run-length encoded Radiance scanlines.
    #[arg(long)]
    pub no_rle: bool,
    /// Write Radiance XYZE instead of RGBE.
    #[arg(long)]
    pub xyze: bool,
    /// Transfer function for 8-bit output.
    #[arg(long, value_parser = ["gamma22", "srgb", "pq", "log", "pu"], default_value = "srgb")]
    pub transfer: String,
    /// Nits of input value 1, needed for the absolute transfers (pq, log, pu).
    #[arg(long)]
    pub nits: Option<f64>,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub input: PathBuf,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
    /// Print a JSON object instead of key=value lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Manifest with one `path exposure_seconds` pair per line.
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Skip global alignment.
    #[arg(long)]
    pub no_align: bool,
    /// Pyramid levels for alignment.
    #[arg(long, default_value_t = 6)]
    pub levels: u32,
    /// Response smoothness weight.
    #[arg(long, default_value_t = 20.0)]
    pub lambda: f64,
    /// Pixel sites sampled for response recovery.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Use this response table (256 log-exposure lines) instead of recovering one.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Save the response table used.
    #[arg(long)]
    pub response_out: Option<PathBuf>,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
}

#[derive(Args, Debug)]
pub struct TonemapArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_parser = ["global", "local"], default_value = "global")]
    pub op: String,
    /// Saturation exponent p, or `auto` to follow the curve slope.
    #[arg(long, default_value = "auto")]
    pub saturation: Saturation,
    /// Color correction: eq3 (power) or eq4 (luminance preserving).
    #[arg(long, default_value = "eq3")]
    pub formula: Formula,
    /// Display value of the log-average luminance (global operator).
    #[arg(long, default_value_t = 0.18)]
    pub key: f64,
    /// Input luminance mapped to white (global operator; default image maximum).
    #[arg(long)]
    pub white: Option<f64>,
    /// Spatial sigma of the base filter in pixels (local operator).
    #[arg(long, default_value_t = 8.0)]
    pub sigma_spatial: f64,
    /// Range sigma in log10 units (local operator).
    #[arg(long, default_value_t = 0.4)]
    pub sigma_range: f64,
    /// Target log10 range of the base layer (local operator).
    #[arg(long, default_value_t = 1.6)]
    pub contrast: f64,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
}

#[derive(Args, Debug)]
pub struct ExpandArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Nits assigned to code 255.
    #[arg(long, default_value_t = 1000.0)]
    pub peak: f64,
    #[arg(long, default_value_t = 1.6)]
    pub alpha: f64,
    /// `srgb`, `gamma22` or `crf:<response table file>`.
    #[arg(long, default_value = "srgb")]
    pub linearizer: String,
    /// Smooth quantization steps before expanding.
    #[arg(long)]
    pub prefilter: bool,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    /// Metrics to run (pu-psnr, log-psnr, pu-ssim, dri); repeat or separate with commas.
    #[arg(long, value_delimiter = ',', default_value = "log-psnr")]
    pub metric: Vec<MetricKind>,
    /// Nits of value 1 in both files; required by pu-psnr and pu-ssim.
    #[arg(long)]
    pub nits: Option<f64>,
    /// Pixels per degree of visual angle (dri).
    #[arg(long, default_value_t = 30.0)]
    pub ppd: f64,
    /// Write per-pixel maps as `<prefix>-<metric>.pfm`.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct PackArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// lossless, lossy16 or lossy8.
    #[arg(long, default_value = "lossless")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.18)]
    pub key: f64,
    #[arg(long)]
    pub white: Option<f64>,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
}

#[derive(Args, Debug)]
pub struct UnpackArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Write only the base layer as PPM.
    #[arg(long)]
    pub base_only: bool,
    /// Format override (hdr, pfm, ppm); defaults to the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
}

fn parse_format(s: &str) -> Result<FileFormat, String> {
    FileFormat::from_name(s).ok_or_else(|| "expected hdr, pfm or ppm".to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Info(a) => commands::info(a),
        Command::Merge(a) => commands::merge(a, cli.seed),
        Command::Tonemap(a) => commands::tonemap(a),
        Command::Expand(a) => commands::expand(a),
        Command::Compare(a) => commands::compare(a),
        Command::Pack(a) => commands::pack(a),
        Command::Unpack(a) => commands::unpack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
