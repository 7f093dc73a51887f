use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Solvability certificates for systems of real quadratic equations.
#[derive(Debug, Parser)]
#[command(name = "quadcert", version)]
pub struct Cli {
    /// Print a versioned JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads (QUADCERT_THREADS takes precedence).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the operator-norm certificate to an instance.
    Certify {
        path: PathBuf,
        #[arg(long, default_value_t = quadcert::certifier::DEFAULT_ETA)]
        eta: f64,
    },
    /// Relax, interiorize, factor and certify; optionally run the integral
    /// check and the oracle.
    Pipeline {
        path: PathBuf,
        #[arg(long, default_value_t = quadcert::certifier::DEFAULT_ETA)]
        eta: f64,
        #[arg(long)]
        verify_integral: bool,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 50)]
        starts: usize,
        #[arg(long, default_value_t = 200)]
        entropy_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the semidefinite relaxation.
    Relax {
        path: PathBuf,
        #[arg(long, default_value_t = 200)]
        entropy_steps: usize,
        /// Print the feasible matrix as well.
        #[arg(long)]
        matrix: bool,
    },
    /// Monte Carlo estimate of the Fourier integral.
    Verify {
        path: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Multistart least-squares search for a solution.
    Solve {
        path: PathBuf,
        #[arg(long, default_value_t = 50)]
        starts: usize,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment (scaling, slice, moments, tameness) and write CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub kind: String,
    /// Dimensions (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Numbers of equations (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of affine constraints (slice).
    #[arg(long)]
    pub codim: Option<usize>,
    #[arg(long, default_value_t = quadcert::certifier::DEFAULT_ETA)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads(flag: Option<usize>) -> Result<(), String> {
    let env = match std::env::var("QUADCERT_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("QUADCERT_THREADS must be a positive integer, got {v:?}"))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(flag) {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    ExitCode::from(commands::run(&cli))
}
