//! `messkit`: fit bath decompositions, propagate with any backend, compare
//! backends and run the acceptance suite.
//!
//! Exit status: 0 pass, 1 flagged non-convergence or failed comparison,
//! 2 usage or validation error, 3 internal error.

mod config;
mod run;

use clap::{Parser, Subcommand};
use config::RunConfig;
use run::{Context, Failure, Outcome, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "messkit",
    version,
    about = "Effective-mode open quantum system toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Replaces output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Exit 0 even when a run is flagged as not converged.
    #[arg(long, global = true)]
    allow_flagged: bool,
    /// Worker threads for ensembles; all cores when absent.
    #[arg(long, global = true, env = "MESSKIT_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose the bath and write the mode-set file.
    Fit,
    /// Chain-map the bath and write the recurrence coefficients.
    Chainmap,
    /// Decompose, propagate and write the time series.
    Propagate,
    /// Run the two backends of the [compare] section and compare them.
    Compare,
    /// Run the exact oracle of the [oracle] section.
    Oracle,
    /// Run the acceptance criteria.
    Suite {
        /// Comma-separated criterion ids; all when absent.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

fn execute(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure {
                code: 2,
                message: "--threads must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 3,
                message: format!("thread pool: {e}"),
            })?;
    }
    let ov = Overrides {
        seed: cli.seed_override,
        out_dir: cli.out_dir.clone(),
    };
    if let Command::Suite { criteria } = &cli.command {
        return run::cmd_suite(criteria, ov.seed, ov.out_dir.as_deref());
    }
    let Some(path) = &cli.config else {
        return Err(Failure {
            code: 2,
            message: "--config is required for this subcommand".into(),
        });
    };
    let ctx = Context::new(RunConfig::load(path)?, &ov)?;
    match cli.command {
        Command::Fit => run::cmd_fit(&ctx, cli.allow_flagged),
        Command::Chainmap => run::cmd_chainmap(&ctx, cli.allow_flagged),
        Command::Propagate => run::cmd_propagate(&ctx, cli.allow_flagged),
        Command::Compare => run::cmd_compare(&ctx, cli.allow_flagged),
        Command::Oracle => run::cmd_oracle(&ctx, cli.allow_flagged),
        Command::Suite { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
