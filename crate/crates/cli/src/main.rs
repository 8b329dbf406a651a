use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use cutlocus::par::Parallelism;
use cutlocus::run::{run_scenario, RunOptions};
use cutlocus::scenario::Scenario;
use cutlocus::verify::{verify_all, VerifyOptions, CHECKS};

/// Distance functions, cut loci and reach on model surfaces.
#[derive(Parser)]
#[command(name = "cutlocus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario and write the artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification suite and print the record stream.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also print the human-readable summary to stderr.
        #[arg(long)]
        summary: bool,
    },
    /// List the check ids of the verification suite.
    ListChecks,
}

fn parallelism(threads: Option<usize>) -> Result<Parallelism> {
    match threads {
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(1) => Ok(Parallelism::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow::anyhow!("configuring the thread pool: {e}"))?;
            #[cfg(not(feature = "parallel"))]
            let _ = n;
            Ok(Parallelism::Parallel)
        }
        None => Ok(Parallelism::Parallel),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { scenario, out, threads, seed } => {
            let parallelism = parallelism(threads)?;
            let sc = Scenario::load(&scenario)?;
            let outcome = run_scenario(&sc, &out, &RunOptions { parallelism, seed })?;
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            for (task, err) in &outcome.task_errors {
                eprintln!("task {task} failed: {err}");
            }
            if let Some(report) = &outcome.report {
                print!("{}", report.summary_text());
            }
            Ok(outcome.success())
        }
        Command::Verify { scenario, threads, seed, summary } => {
            let parallelism = parallelism(threads)?;
            let sc = Scenario::load(&scenario)?;
            let report = verify_all(&sc, &VerifyOptions { parallelism, seed })?;
            print!("{}", report.records_text());
            if summary {
                eprint!("{}", report.summary_text());
            }
            Ok(!report.failed())
        }
        Command::ListChecks => {
            let width = CHECKS.iter().map(|c| c.id.len()).max().unwrap_or(0);
            for c in CHECKS {
                println!("{:<width$}  {}", c.id, c.description);
            }
            Ok(true)
        }
    }
}
