//! Experiment runner for the `iscpt` library: TOML configs in, CSV tables
//! and a JSON manifest out.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod runner;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, SolverConfig};
use crate::error::CliError;
use crate::plot::Figure;
use crate::runner::{Mode, RunArgs};

const OUTPUT_HELP: &str = "\
Output directory precedence:
  1. --out
  2. output_dir in the config (relative to the config file)
  3. $ISCPT_OUT_DIR
  4. ./results

Exit codes: 0 success (infeasible designs included), 1 runtime error,
2 usage or configuration error.";

#[derive(Debug, Parser)]
#[command(name = "iscpt", version, about = "Sensing, communication and power transfer trade-off experiments", after_help = OUTPUT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Run one experiment cell; `[sweep]` is ignored.
    #[command(after_help = OUTPUT_HELP)]
    Run(RunOpts),
    /// Run every cell of the `[sweep]` cross product.
    #[command(after_help = OUTPUT_HELP)]
    Sweep(RunOpts),
    /// Turn a results directory into a figure-ready CSV.
    Plot(PlotOpts),
}

#[derive(Debug, Args)]
struct RunOpts {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[arg(long = "solver.kkt-tol", value_name = "TOL")]
    kkt_tol: Option<f64>,
    #[arg(long = "solver.max-outer", value_name = "N")]
    max_outer: Option<usize>,
    #[arg(long = "solver.max-inner", value_name = "N")]
    max_inner: Option<usize>,
    #[arg(long = "solver.starts", value_name = "N")]
    starts: Option<usize>,
}

#[derive(Debug, Args)]
struct PlotOpts {
    #[arg(long, value_enum)]
    figure: Figure,
    /// Results directory holding manifest.json.
    #[arg(long)]
    input: PathBuf,
    /// Where to write `<figure>.csv`; defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunOpts {
    fn into_args(self) -> RunArgs {
        RunArgs {
            config: self.config,
            overrides: Overrides {
                seed: self.seed,
                solver: SolverConfig {
                    kkt_tol: self.kkt_tol,
                    max_outer: self.max_outer,
                    max_inner: self.max_inner,
                    starts: self.starts,
                },
            },
            out: self.out,
            threads: self.threads.map(|t| t as usize),
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Sub::Run(opts) => report(runner::execute(&opts.into_args(), Mode::Run)?),
        Sub::Sweep(opts) => report(runner::execute(&opts.into_args(), Mode::Sweep)?),
        Sub::Plot(opts) => {
            let path = plot::plot(opts.figure, &opts.input, opts.out.as_deref())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn report(summary: runner::Summary) {
    println!("{} cell(s), output in {}", summary.cells, summary.out_dir.display());
    for f in &summary.files {
        println!("  {}", f.display());
    }
}
