mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use facekit::matching::DistanceKind;
use facekit::Error;

use crate::config::{parse_measure, Method, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "facekit", version, about = "Face detection, features, contours and recognition")]
struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find faces and write their boxes as JSON.
    Detect(DetectArgs),
    /// Locate eyes and lips inside detected faces.
    Features(FeaturesArgs),
    /// Fit the face contour and write it as CSV.
    Contour(ContourArgs),
    /// Train a recognition model on a directory of PGM faces.
    Train(TrainArgs),
    /// Rank gallery faces by distance to each probe.
    Recognize(RecognizeArgs),
    /// Recognition metrics from a distance matrix.
    Eval(EvalArgs),
    /// Timing benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Fixture(FixtureCommand),
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DetectArgs {
    image: PathBuf,
    /// Template directory written by `fixture bank` (bank.json + PGMs).
    #[arg(long, required_unless_present = "contour_mode")]
    templates: Option<PathBuf>,
    /// Verifier model directory; without it pre-detections are only merged.
    #[arg(long)]
    verifier: Option<PathBuf>,
    /// Detect faces as ellipses fitted to edge contours instead.
    #[arg(long, conflicts_with_all = ["templates", "verifier"])]
    contour_mode: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    image: PathBuf,
    /// Detections JSON; the whole image is searched when omitted.
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ContourArgs {
    image: PathBuf,
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Contour CSV (`x,y` per point).
    #[arg(long)]
    out: PathBuf,
    /// PGM copy of the image with the initial and final contours drawn.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Number of contour points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    gallery: PathBuf,
    /// Model directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    wavelet: Option<String>,
    #[arg(long)]
    level: Option<usize>,
}

#[derive(Args, Debug)]
struct RecognizeArgs {
    model: PathBuf,
    gallery: PathBuf,
    #[arg(required = true)]
    probes: Vec<PathBuf>,
    /// e.g. weighted-angle, euclidean, angle, minkowski:3
    #[arg(long, value_parser = parse_measure)]
    measure: Option<DistanceKind>,
    #[arg(long)]
    features: Option<usize>,
    /// Reject when the best distance is at or above this.
    #[arg(long, allow_negative_numbers = true)]
    reject: Option<f64>,
    #[arg(long)]
    whiten: bool,
    /// Also write the probe x gallery distance matrix as CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// One distance CSV, or two to combine serially.
    #[arg(long, num_args = 1..=2, required = true)]
    distances: Vec<PathBuf>,
    /// Shortlist size for serial combining, in % of the gallery.
    #[arg(long)]
    combine_rank: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Shared multi-template correlation against one run per template.
    Ncc {
        #[arg(long, default_value_t = 300)]
        rows: usize,
        #[arg(long, default_value_t = 300)]
        cols: usize,
        #[arg(long, default_value_t = 10)]
        templates: usize,
        #[arg(long, default_value_t = 11)]
        template_rows: usize,
        #[arg(long, default_value_t = 25)]
        template_cols: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCA against WPD+PCA training time over growing training sets.
    WpdpcaTrain {
        #[arg(long, value_delimiter = ',', default_value = "300,600,900,1200")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 128)]
        rows: usize,
        #[arg(long, default_value_t = 128)]
        cols: usize,
        #[arg(long)]
        wavelet: Option<String>,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum FixtureCommand {
    /// One synthetic face and, optionally, its ground truth.
    Face {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        #[arg(long, default_value_t = 200)]
        cols: usize,
        #[arg(long, default_value_t = 40.0)]
        eye_distance: f64,
        /// In-plane rotation in degrees.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        angle: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        no_lips: bool,
    },
    /// One face image per person, named `personNNN.pgm`.
    Gallery {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        persons: usize,
        #[arg(long, default_value_t = 128)]
        rows: usize,
        #[arg(long, default_value_t = 128)]
        cols: usize,
    },
    /// The built-in pre-detection template bank.
    Bank {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a face verifier on synthetic faces and backgrounds.
    Verifier {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::EmptyInput(_) => 3,
        Error::DimensionMismatch { .. } => 4,
        Error::Format(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
        .and_then(|cfg| commands::run(cli.command, cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
