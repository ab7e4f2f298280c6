//! Actor-critic training runs with periodic checkpoints and resume.

use std::cell::RefCell;
use std::path::{Path, PathBuf};

use podiv_core::trainer::{train_from, Checkpoint, FilterSource, PeMode, TrainLog, TrainRecord, TrainerConfig};
use serde::{Deserialize, Serialize};

use super::estimate::{averaged_heuristic, estimate_batch};
use super::filter_params;
use crate::config::{FilterChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{output_path, read_json, write_csv, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    Ml,
    Ctd,
    /// CTD with the regularizer pulled toward averaged heuristic estimates.
    CtdStar,
}

impl std::str::FromStr for ModeChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ml" => Ok(ModeChoice::Ml),
            "ctd" => Ok(ModeChoice::Ctd),
            "ctd-star" => Ok(ModeChoice::CtdStar),
            other => Err(CliError::Config(format!("unknown mode '{other}' (expected ml, ctd or ctd-star)"))),
        }
    }
}

/// One CSV line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub iteration: usize,
    pub value: f64,
    pub loss: f64,
    pub loss_ma: f64,
    pub exp_gamma0: f64,
    pub exp_gamma1: f64,
    pub exp_gamma2: f64,
    pub exp_gamma3: f64,
    pub exp_gamma4: f64,
    pub grad_norm: f64,
    pub aborted: bool,
    pub rejected: bool,
}

impl From<&TrainRecord> for TrainRow {
    fn from(r: &TrainRecord) -> Self {
        let [e0, e1, e2, e3, e4] = r.exp_gamma;
        TrainRow {
            iteration: r.iteration,
            value: r.value,
            loss: r.loss,
            loss_ma: r.loss_ma,
            exp_gamma0: e0,
            exp_gamma1: e1,
            exp_gamma2: e2,
            exp_gamma3: e3,
            exp_gamma4: e4,
            grad_norm: r.grad_norm,
            aborted: r.aborted,
            rejected: r.rejected,
        }
    }
}

/// Trainer settings and filter source for a mode.
pub fn prepare(cfg: &RunConfig, mode: ModeChoice, filter: FilterChoice) -> CliResult<(TrainerConfig, FilterSource)> {
    let mut trainer = cfg.trainer.clone();
    trainer.mode = if mode == ModeChoice::Ml { PeMode::Ml } else { PeMode::Ctd };
    if mode == ModeChoice::CtdStar {
        trainer.env_reference = averaged_heuristic(cfg, &estimate_batch(cfg)?)?;
    }
    let source = if filter == FilterChoice::Est && cfg.train.reestimate_each_iteration {
        FilterSource::Reestimate {
            heuristic: cfg.estimation.heuristic,
            history_steps: cfg.steps_for(cfg.train.history_years),
            reference_follows: false,
        }
    } else {
        FilterSource::Fixed(filter_params(cfg, filter)?)
    };
    Ok((trainer, source))
}

fn read_log(path: &Path) -> CliResult<Vec<TrainRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<TrainRow>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub files: Vec<PathBuf>,
}

/// Trains and writes `train_log.csv` and `checkpoint.json` (also every
/// `train.checkpoint_every` iterations). With `resume`, training continues from that
/// checkpoint and the existing log's earlier rows are kept.
pub fn run(
    cfg: &RunConfig,
    mode: ModeChoice,
    filter: FilterChoice,
    resume: Option<&Path>,
    iterations: Option<usize>,
) -> CliResult<TrainOutput> {
    let (mut trainer, source) = prepare(cfg, mode, filter)?;
    if let Some(n) = iterations {
        trainer.n_iterations = n;
    }
    let log_path = output_path(&cfg.out_dir, "train_log.csv")?;
    let ck_path = output_path(&cfg.out_dir, "checkpoint.json")?;
    let (state, mut rows) = match resume {
        Some(p) => {
            let state: Checkpoint = read_json(p)?;
            let mut rows = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
            rows.retain(|r| r.iteration < state.next_iteration);
            (state, rows)
        }
        None => (Checkpoint::initial(&trainer), Vec::new()),
    };
    let write_error = RefCell::new(None);
    let mut on_checkpoint = |ck: &Checkpoint| {
        if let Err(e) = write_json(&ck_path, ck) {
            write_error.borrow_mut().get_or_insert(e);
        }
    };
    let (checkpoint, log) = train_from(
        &trainer,
        &cfg.env,
        &source,
        &cfg.control,
        cfg.seed,
        state,
        cfg.train.checkpoint_every,
        &mut on_checkpoint,
    )?;
    if let Some(e) = write_error.into_inner() {
        return Err(e);
    }
    write_json(&ck_path, &checkpoint)?;
    rows.extend(log.records.iter().map(TrainRow::from));
    write_csv(&log_path, &rows)?;
    Ok(TrainOutput { checkpoint, log, files: vec![log_path, ck_path] })
}
