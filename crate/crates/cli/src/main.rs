//! `fgnest` command-line front end.
//!
//! Every command is deterministic given its flags; all randomness flows from
//! `--seed`. Failures print a one-line JSON error to stderr and exit with a
//! kind-specific code (see `error.rs`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fgnest::nested::NsConfig;
use fgnest::scenarios::Family;

mod commands;
mod error;

#[derive(Parser)]
#[command(name = "fgnest", version, about = "Nested-sampling inference on SLAM factor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NsArgs {
    #[arg(long, default_value_t = NsConfig::default().n_live)]
    n_live: usize,
    #[arg(long, default_value_t = NsConfig::default().walk_steps)]
    walk_steps: usize,
    #[arg(long, default_value_t = NsConfig::default().dlogz)]
    dlogz: f64,
    #[arg(long, default_value_t = NsConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl NsArgs {
    fn config(&self) -> NsConfig {
        NsConfig {
            n_live: self.n_live,
            walk_steps: self.walk_steps,
            dlogz: self.dlogz,
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Rmse,
    Mmd,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scenario graph and its metadata sidecar.
    Generate {
        #[arg(long, value_parser = parse_family)]
        scenario: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Poses per robot.
        #[arg(long)]
        poses: Option<usize>,
        #[arg(long)]
        robots: Option<usize>,
        #[arg(long)]
        loops: Option<usize>,
        #[arg(long)]
        landmarks: Option<usize>,
        /// Truncate at this time step.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
        /// Metadata JSON path; defaults to `<output>.json`.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Print the acyclic / loop-closing factor split.
    Decompose { graph: PathBuf },
    /// Nested sampling over a graph; writes weighted samples and a manifest.
    Solve {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        ns: NsArgs,
        /// Write this many equally weighted rows instead of the dead points.
        #[arg(long)]
        resample: Option<usize>,
        /// Manifest path; defaults to `<output>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Gauss-Newton MAP and draws from its Laplace approximation.
    Laplace {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = fgnest::laplace::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compare two sample files; prints one JSON line.
    Evaluate {
        #[arg(long, value_enum)]
        metric: Metric,
        a: PathBuf,
        b: PathBuf,
        /// Seed for resampling weighted inputs before an MMD comparison.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve every data-association hypothesis and mix the posteriors.
    Hypotheses {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Weights table path; defaults to `<output>.weights.csv`.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[command(flatten)]
        ns: NsArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: fgnest::scenarios::ScenarioError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
