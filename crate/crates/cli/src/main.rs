//! `qseg` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 input/output, 3 solver failure.
//! Diagnostics go to stderr as a single line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "qseg", version, about = "Image segmentation as a min-cut QUBO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment one image into a binary mask (PGM) with a JSON sidecar.
    Segment(SegmentArgs),
    /// Write seeded synthetic grid instances as edge lists.
    Synth(SynthArgs),
    /// Run solvers over edge-list instances and write CSV reports.
    Bench(BenchArgs),
    /// Score predicted masks against ground-truth masks.
    Eval(EvalArgs),
    /// Write the min-cut QUBO of an instance or image in text form.
    ExportQubo(ExportArgs),
    /// Fit an edge-weight model to images and masks.
    LearnWeights(LearnArgs),
    /// Logical-variable table for the grid and terminal formulations.
    Scalability(ScalabilityArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long)]
    num_reads: Option<usize>,
    /// Annealing sweeps per read.
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    tabu_tenure: Option<usize>,
    #[arg(long)]
    tabu_iterations: Option<usize>,
    /// Seconds after which no new reads start.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Preprocess {
    None,
    Forest,
    Flood,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Input raster (PGM, PPM, or multiband).
    input: Option<PathBuf>,
    /// Re-run from a sidecar written by an earlier `segment`.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preprocess::None)]
    preprocess: Preprocess,
    /// HSV channel kept by forest preprocessing: hue, saturation, or value.
    #[arg(long, default_value = "hue")]
    hsv_channel: String,
    /// Band indices used by flood preprocessing (zero-based).
    #[arg(long, default_value_t = 1)]
    green_band: usize,
    #[arg(long, default_value_t = 3)]
    nir_band: usize,
    /// Downscale before segmenting: `N` or `WxH`.
    #[arg(long)]
    downscale: Option<String>,
    /// Segment independent square patches of this size and stitch them.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Use raw dissimilarities instead of signed normalized weights.
    #[arg(long)]
    no_normalize: bool,
    /// Learned edge-weight model to use instead of the Gaussian weights.
    #[arg(long)]
    weights_model: Option<PathBuf>,
    /// exhaustive, sa, or tabu.
    #[arg(long, default_value = "sa")]
    solver: String,
    #[command(flatten)]
    budget: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Grid sizes, e.g. `2-44` or `2,4,8`.
    #[arg(long, default_value = "2-44")]
    sizes: String,
    /// Seeds, e.g. `1-5`.
    #[arg(long, default_value = "1-5")]
    seeds: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of edge-list instances.
    #[arg(long)]
    instances: PathBuf,
    /// Comma-separated solvers.
    #[arg(long, default_value = "sa")]
    solvers: String,
    #[command(flatten)]
    budget: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the CSV reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Instances solved concurrently (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory (or single file) of predicted masks.
    #[arg(long)]
    pred: PathBuf,
    /// Directory (or single file) of ground-truth masks; 255 marks uncertain pixels.
    #[arg(long)]
    truth: PathBuf,
    /// JSON report path.
    #[arg(long, default_value = "eval.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Edge-list instance to export.
    #[arg(long, conflicts_with_all = ["image", "synthetic"])]
    instance: Option<PathBuf>,
    /// Image to turn into a graph with Gaussian weights.
    #[arg(long, conflicts_with = "synthetic")]
    image: Option<PathBuf>,
    /// Generate a synthetic grid of this size with `--seed`.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output QUBO file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// Directory of single-band training images.
    #[arg(long)]
    images: PathBuf,
    /// Directory of binary masks (PGM), paired with images by file stem.
    #[arg(long)]
    masks: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScalabilityArgs {
    /// Square grid sizes, e.g. `2-44`.
    #[arg(long, default_value = "2-44")]
    sizes: String,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failed command: its exit code and one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<qseg::Error> for Failure {
    fn from(e: qseg::Error) -> Self {
        use qseg::Error as E;
        let message = e.to_string();
        match e {
            E::InvalidParameter(_) => Failure::usage(message),
            _ if e.is_solver_failure() => Failure::solver(message),
            E::UndefinedReference => Failure::solver(message),
            _ => Failure::io(message),
        }
    }
}

fn one_line(s: &str) -> String {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("usage error");
            eprintln!("qseg: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => commands::bench(a),
        Command::Eval(a) => commands::eval(a),
        Command::ExportQubo(a) => commands::export_qubo(a),
        Command::LearnWeights(a) => commands::learn_weights(a),
        Command::Scalability(a) => commands::scalability(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qseg: {}", one_line(&f.message));
            ExitCode::from(f.code)
        }
    }
}
