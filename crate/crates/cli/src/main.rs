//! `viprox`: generate instances, run solver configurations and suites,
//! evaluate dual gaps, and run the lemma checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use viprox_core::harness::{self, HarnessError, EXIT_NUMERIC};
use viprox_core::problems::InstanceType;
use viprox_core::verify::DEFAULT_DRAWS;

#[derive(Parser)]
#[command(
    name = "viprox",
    version,
    about = "Mirror-prox benchmark harness for variational inequalities"
)]
struct Cli {
    /// Worker threads for runs and configs.
    #[arg(long, global = true, env = "VIPROX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    MatrixGame,
    PiecewiseQuad,
}

#[derive(Subcommand)]
enum Command {
    /// Write a problem instance as JSON.
    Generate {
        #[arg(long = "type", value_enum)]
        kind: Family,
        #[arg(long = "lipschitz", short = 'L', default_value_t = 10.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configuration; writes trajectory.csv and summary.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a suite of configurations; writes bench.csv and summary.json.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the lemma checks; exits with 4 on any violation.
    Verify {
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled and exact dual gap of a point.
    Gap {
        /// Instance file.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated coordinates or a JSON array.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = viprox_core::merit::DEFAULT_GAP_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match out {
        Some(p) => harness::write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate {
            kind,
            lipschitz,
            sigma,
            seed,
            out,
        } => {
            let kind = match kind {
                Family::MatrixGame => InstanceType::MatrixGame,
                Family::PiecewiseQuad => InstanceType::PiecewiseQuad,
            };
            emit(
                out.as_deref(),
                &harness::cmd_generate(kind, lipschitz, sigma, seed)?,
            )?;
        }
        Command::Solve { config, out, seed } => {
            let (csv, summary) = harness::cmd_solve(&config, seed)?;
            harness::write_file(&out.join("trajectory.csv"), &csv)?;
            harness::write_file(&out.join("summary.json"), &summary)?;
        }
        Command::Bench { config, out, seed } => {
            let (csv, summary) = harness::cmd_bench(&config, seed)?;
            harness::write_file(&out.join("bench.csv"), &csv)?;
            harness::write_file(&out.join("summary.json"), &summary)?;
        }
        Command::Verify { draws, seed, out } => {
            let (report, json) = harness::cmd_verify(draws, seed);
            emit(out.as_deref(), &json)?;
            let bad = report.total_violations();
            if bad > 0 {
                return Err(HarnessError::Verification(bad).into());
            }
        }
        Command::Gap {
            config,
            point,
            samples,
            seed,
        } => {
            let x = harness::parse_point(&point)?;
            print!("{}", harness::cmd_gap(&config, &x, samples, seed)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<HarnessError>()
                .map_or(EXIT_NUMERIC, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
