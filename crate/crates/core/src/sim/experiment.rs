use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;

use crate::adaptive::{ReceiverKind, StepSizes};
use crate::error::{Error, Result};
use crate::seed::{trial_seed, Domain};
use crate::sim::config::{ExperimentConfig, ExperimentKind};
use crate::sim::stepsize::optimize_step_sizes;
use crate::sim::trial::{run_trial, RunSettings, Scenario, TrialMetrics};

/// Aggregated results of one receiver in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverResult {
    pub kind: ReceiverKind,
    pub steps: StepSizes,
    pub pilot_ber: f64,
    pub ber_curve: Vec<f64>,
    pub ber_curve_stderr: Vec<f64>,
    pub mse_curve: Vec<f64>,
    pub mse_curve_stderr: Vec<f64>,
    pub ber_final: f64,
    pub ber_stderr: f64,
    /// Decision-directed BER of every evaluation trial.
    pub trial_ber: Vec<f64>,
    /// End-of-packet smoothed channel MSE of every evaluation trial.
    pub trial_mse_final: Vec<f64>,
}

/// One point of an experiment (a sweep value, or the single scenario).
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub x_value: f64,
    pub k_users: usize,
    pub ebn0_db: f64,
    pub receivers: Vec<ReceiverResult>,
}

impl CellResult {
    pub fn receiver(&self, kind: ReceiverKind) -> Option<&ReceiverResult> {
        self.receivers.iter().find(|r| r.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = rows.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| mean_stderr(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .unzip()
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `job` for every seed, in parallel or sequentially; results come
/// back in seed order either way. A panicking job aborts with its seed.
fn run_seeds<T, F>(seeds: &[u64], parallel: bool, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let one = |&seed: &u64| {
        catch_unwind(AssertUnwindSafe(|| job(seed))).unwrap_or_else(|p| {
            Err(Error::TrialPanicked {
                seed,
                msg: panic_message(p),
            })
        })
    };
    if parallel {
        seeds.par_iter().map(one).collect()
    } else {
        seeds.iter().map(one).collect()
    }
}

fn run_cell(cfg: &ExperimentConfig, k_users: usize, ebn0_db: f64, x_value: f64) -> Result<CellResult> {
    let scn = Scenario::from_config(cfg, k_users, ebn0_db)?;
    let settings = RunSettings::from_config(cfg);
    let pilot_seeds: Vec<u64> = (0..cfg.pilot_trials as u64)
        .map(|t| trial_seed(cfg.master_seed, Domain::Pilot, 0, t))
        .collect();
    let eval_seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|t| trial_seed(cfg.master_seed, Domain::Evaluation, 0, t))
        .collect();

    let mut chosen = Vec::with_capacity(cfg.receivers.len());
    for &kind in &cfg.receivers {
        let choice = optimize_step_sizes(&scn, kind, &cfg.grid(kind), &settings, &pilot_seeds, cfg.parallel)?;
        chosen.push((kind, choice));
    }
    // The linear channel estimator does not affect decisions; it shares the
    // jo-sic channel step so the MSE comparison isolates the cancellation.
    let jo_sic_mu_h = chosen
        .iter()
        .find(|(k, _)| *k == ReceiverKind::JoSic)
        .map(|(_, c)| c.steps.mu_h);
    if let Some(mu_h) = jo_sic_mu_h {
        for (kind, choice) in &mut chosen {
            if *kind == ReceiverKind::Linear {
                choice.steps.mu_h = mu_h;
            }
        }
    }
    let receivers: Vec<(ReceiverKind, StepSizes)> = chosen.iter().map(|(k, c)| (*k, c.steps)).collect();
    let trials = run_seeds(&eval_seeds, cfg.parallel, |seed| run_trial(&scn, &receivers, &settings, seed))?;

    let bits_per_symbol = 2.0 * k_users as f64;
    let results = chosen
        .iter()
        .enumerate()
        .map(|(r, (kind, choice))| {
            let per_trial: Vec<&TrialMetrics> = trials.iter().map(|t| &t[r]).collect();
            let ber_rows: Vec<Vec<f64>> = per_trial
                .iter()
                .map(|m| m.errors_per_symbol.iter().map(|&e| e as f64 / bits_per_symbol).collect())
                .collect();
            let mse_rows: Vec<Vec<f64>> = per_trial.iter().map(|m| m.mse_per_symbol.clone()).collect();
            let (ber_curve, ber_curve_stderr) = column_stats(&ber_rows);
            let (mse_curve, mse_curve_stderr) = column_stats(&mse_rows);
            let trial_ber: Vec<f64> = per_trial.iter().map(|m| m.ber_final).collect();
            let (ber_final, ber_stderr) = mean_stderr(&trial_ber);
            ReceiverResult {
                kind: *kind,
                steps: choice.steps,
                pilot_ber: choice.pilot_ber,
                ber_curve,
                ber_curve_stderr,
                mse_curve,
                mse_curve_stderr,
                ber_final,
                ber_stderr,
                trial_ber,
                trial_mse_final: per_trial.iter().map(|m| m.mse_final).collect(),
            }
        })
        .collect();
    Ok(CellResult {
        x_value,
        k_users,
        ebn0_db,
        receivers: results,
    })
}

/// Validates the config, runs every cell and aggregates the trials.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cells = match cfg.experiment {
        ExperimentKind::Convergence | ExperimentKind::ChannelMse => {
            vec![run_cell(cfg, cfg.k_users[0], cfg.ebn0_db[0], cfg.ebn0_db[0])?]
        }
        ExperimentKind::SweepEbn0 => cfg
            .ebn0_db
            .iter()
            .map(|&e| run_cell(cfg, cfg.k_users[0], e, e))
            .collect::<Result<_>>()?,
        ExperimentKind::SweepUsers => cfg
            .k_users
            .iter()
            .map(|&k| run_cell(cfg, k, cfg.ebn0_db[0], k as f64))
            .collect::<Result<_>>()?,
    };
    Ok(ExperimentResult {
        config: cfg.clone(),
        cells,
    })
}
