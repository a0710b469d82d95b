//! `ensimp` command-line harness.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "ensimp", version, about = "Ensemble imputation and classification experiments on incomplete data")]
struct Cli {
    /// Random seed; every subcommand is a pure function of its inputs, flags and seed [default: 1, or the config's `seed`]
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads; 1 runs sequentially, results are identical for any N [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Only report warnings and errors on stderr
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the repeated cross-validation grid and export all result files
    Run(RunArgs),
    /// Remove values completely at random from a complete CSV
    Inject(InjectArgs),
    /// Fill the missing cells of a CSV
    Impute(ImputeArgs),
    /// Build one method's model on a CSV and save it
    Train(TrainArgs),
    /// Predict the records of a CSV with a saved model
    Predict(PredictArgs),
    /// Pairwise kappa-error points of a saved ensemble on a test CSV
    Kappa(KappaArgs),
    /// Rebuild accuracy tables, ranks and the summary from a results directory
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Comma-separated dataset names (resolved as <data-dir>/<name>.csv) or CSV paths
    #[arg(long, value_name = "LIST")]
    pub datasets: Option<String>,
    /// Directory holding the bundled datasets [default: data]
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Label column name or 0-based index [default: class]
    #[arg(long, value_name = "COLUMN")]
    pub label: Option<String>,
    /// Comma-separated methods [default: all twelve]
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Comma-separated missingness ratios [default: 0,0.05,0.10,0.15,0.20,0.25,0.30]
    #[arg(long, value_name = "LIST")]
    pub ratios: Option<String>,
    /// Cross-validation repetitions T [default: 30]
    #[arg(long, value_name = "T")]
    pub reps: Option<usize>,
    /// Folds per repetition [default: 2]
    #[arg(long, value_name = "K")]
    pub folds: Option<usize>,
    /// Ensemble size B [default: 25]
    #[arg(short = 'B', long, value_name = "B")]
    pub ensemble_size: Option<usize>,
    /// Imputations per dataset M [default: 5]
    #[arg(short = 'M', long, value_name = "M")]
    pub imputations: Option<usize>,
    /// Result directory [default: the config's `output_dir`, then $ENSIMP_OUTPUT_DIR, then results]
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Extra configuration entry, may be repeated (e.g. --set em_tol=1e-6)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct InjectArgs {
    /// Complete input CSV
    pub input: PathBuf,
    /// Output CSV; missing cells are written as `?`
    pub output: PathBuf,
    /// Fraction of each attribute's values to remove, in [0, 0.5]
    #[arg(long)]
    pub ratio: f64,
    /// Label column name or 0-based index
    #[arg(long, default_value = "class")]
    pub label: String,
    /// Sidecar mask file (1 observed, 0 missing) [default: <output stem>.mask.csv]
    #[arg(long, value_name = "FILE")]
    pub mask: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImputeArgs {
    /// Incomplete input CSV (`?` or empty cells are missing)
    pub input: PathBuf,
    /// Output CSV; with --multiple M and no --average, M files <stem>_1.csv … <stem>_M.csv
    pub output: PathBuf,
    /// Imputer: mei, grandi or em
    #[arg(long, default_value = "em")]
    pub method: String,
    /// Number of imputations M (grandi and em only)
    #[arg(long, value_name = "M", default_value_t = 1)]
    pub multiple: usize,
    /// Average the M imputations into a single complete CSV
    #[arg(long)]
    pub average: bool,
    /// Label column name or 0-based index
    #[arg(long, default_value = "class")]
    pub label: String,
    #[command(flatten)]
    pub tuning: ImputeTuning,
}

#[derive(Args, Debug, Clone)]
pub struct ImputeTuning {
    /// EM convergence tolerance on the largest parameter change
    #[arg(long, default_value_t = 1e-5)]
    pub em_tol: f64,
    /// EM iteration cap
    #[arg(long, default_value_t = 100)]
    pub em_max_iter: usize,
    /// Ridge added to the observed covariance block
    #[arg(long, default_value_t = 1e-6)]
    pub em_ridge: f64,
    /// Truncation bound Z of the Gaussian random imputer
    #[arg(long, default_value_t = 4.0)]
    pub z_bound: f64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training CSV, complete or incomplete
    pub input: PathBuf,
    /// Model file to write (versioned JSON)
    pub model: PathBuf,
    /// One of NoImp, MEI, GRandI, EM, BagNoImp, BagMEI, BagGRandI, BagEM, BagMIGRandI, BagMIEM, MIGRandI, MIEM
    #[arg(long)]
    pub method: String,
    /// Ensemble size B
    #[arg(short = 'B', long, default_value_t = 25)]
    pub ensemble_size: usize,
    /// Imputations per dataset M
    #[arg(short = 'M', long, default_value_t = 5)]
    pub imputations: usize,
    /// Minimum weight on each side of a split
    #[arg(long, default_value_t = 2.0)]
    pub min_leaf_weight: f64,
    /// Depth limit [default: unlimited]
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Test-time handling of missing cells: member (impute with the member's imputers) or native (fractional descent)
    #[arg(long, default_value = "member")]
    pub test_imputation: String,
    /// Label column name or 0-based index
    #[arg(long, default_value = "class")]
    pub label: String,
    /// Print every member's tree to stdout as indented text
    #[arg(long)]
    pub dump_tree: bool,
    #[command(flatten)]
    pub tuning: ImputeTuning,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Test CSV with the same attributes as the training data
    pub input: PathBuf,
    /// Prediction CSV (record,predicted,actual) [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Label column name or 0-based index
    #[arg(long, default_value = "class")]
    pub label: String,
}

#[derive(Args, Debug)]
pub struct KappaArgs {
    /// Ensemble model file written by `train`
    #[arg(long)]
    pub ensemble: PathBuf,
    /// Test CSV
    #[arg(long)]
    pub test: PathBuf,
    /// Output CSV, one row per member pair
    #[arg(long, value_name = "FILE", default_value = "kappa_error.csv")]
    pub output: PathBuf,
    /// Label column name or 0-based index
    #[arg(long, default_value = "class")]
    pub label: String,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Results directory written by `run` [default: $ENSIMP_OUTPUT_DIR, then results]
    pub dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .init();

    let ctx = commands::Context {
        seed: cli.seed,
        workers: cli.workers,
    };
    let result = match cli.command {
        Command::Run(a) => commands::run(&ctx, a),
        Command::Inject(a) => commands::inject(&ctx, a),
        Command::Impute(a) => commands::impute(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Kappa(a) => commands::kappa(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
