use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use podiv::commands::{estimate, evaluate, fd, simulate, train};
use podiv::config::FilterChoice;
use podiv::{CliError, CliResult, RunConfig};
use podiv_core::trainer::PeMode;

#[derive(Parser, Debug)]
#[command(name = "podiv", version, about = "Regime-switching dividend experiments with a learned exploratory policy")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for path-parallel batches (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate ground-truth paths under a constant dividend rate.
    Simulate {
        #[arg(long)]
        n_paths: Option<usize>,
        #[arg(long)]
        years: Option<f64>,
        #[arg(long)]
        dividend_rate: Option<f64>,
    },
    /// Estimate market parameters from simulated histories.
    Estimate {
        /// Estimate a single history and also write its regime labels.
        #[arg(long)]
        path_index: Option<u64>,
    },
    /// Solve the finite-difference benchmark.
    Fd {
        /// Solve every (cap, volatility) pair of the sweep.
        #[arg(long)]
        sweep: bool,
    },
    /// Train the parametric actor-critic.
    Train {
        /// ml, ctd or ctd-star; defaults to the configured trainer mode.
        #[arg(long)]
        mode: Option<train::ModeChoice>,
        /// Defaults to the configured training filter.
        #[arg(long)]
        filter: Option<FilterChoice>,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate frozen policies on common test paths.
    Evaluate {
        /// `optimal` or `label=checkpoint.json`, optionally suffixed `@true` or `@est`.
        #[arg(long = "policy", required = true)]
        policies: Vec<String>,
        /// Filter used by policies without an explicit suffix.
        #[arg(long)]
        filter: Option<FilterChoice>,
        #[arg(long)]
        n_paths: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {w} workers: {e}")))?;
    }
    match cli.command {
        Command::Simulate { n_paths, years, dividend_rate } => {
            if let Some(n) = n_paths {
                cfg.simulate.n_paths = n;
            }
            if let Some(y) = years {
                cfg.simulate.years = y;
            }
            if let Some(d) = dividend_rate {
                cfg.simulate.dividend_rate = d;
            }
            cfg.validate()?;
            Ok(vec![simulate::run(&cfg)?])
        }
        Command::Estimate { path_index } => {
            cfg.validate()?;
            estimate::run(&cfg, path_index)
        }
        Command::Fd { sweep } => {
            cfg.validate()?;
            fd::run(&cfg, sweep)
        }
        Command::Train { mode, filter, resume, iterations } => {
            cfg.validate()?;
            let mode = mode.unwrap_or(match cfg.trainer.mode {
                PeMode::Ml => train::ModeChoice::Ml,
                PeMode::Ctd => train::ModeChoice::Ctd,
            });
            let filter = filter.unwrap_or(cfg.train.filter);
            Ok(train::run(&cfg, mode, filter, resume.as_deref(), iterations)?.files)
        }
        Command::Evaluate { policies, filter, n_paths } => {
            if let Some(n) = n_paths {
                cfg.evaluate.n_paths = n;
            }
            if let Some(f) = filter {
                cfg.evaluate.filter = f;
            }
            cfg.validate()?;
            let specs = policies
                .iter()
                .map(|p| evaluate::PolicySpec::parse(p, cfg.evaluate.filter))
                .collect::<CliResult<Vec<_>>>()?;
            evaluate::run(&cfg, &specs)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
