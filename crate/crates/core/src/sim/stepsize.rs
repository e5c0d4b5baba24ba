//! Per-scenario step-size selection by grid search on pilot trials.

use rayon::prelude::*;

use crate::adaptive::{ReceiverKind, StepSizes};
use crate::error::Result;
use crate::sim::config::StepGrid;
use crate::sim::trial::{generate_trial, run_receiver, RunSettings, Scenario};

/// Candidates that can change the receiver's decisions. `μ_λ` only matters
/// to joint receivers and `μ_h` only to receivers that cancel; unused
/// dimensions are pinned to their first grid value.
pub fn candidates(kind: ReceiverKind, grid: &StepGrid) -> Vec<StepSizes> {
    let lambdas = if kind.is_joint() { grid.mu_lambda.clone() } else { vec![grid.mu_lambda[0]] };
    let hs = if kind == ReceiverKind::Linear { vec![grid.mu_h[0]] } else { grid.mu_h.clone() };
    let mut out = Vec::new();
    for &mu_w in &grid.mu_w {
        for &mu_lambda in &lambdas {
            for &mu_h in &hs {
                out.push(StepSizes { mu_w, mu_lambda, mu_h });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    pub steps: StepSizes,
    /// Mean decision-directed BER over the pilot trials.
    pub pilot_ber: f64,
}

fn steps_key(s: &StepSizes) -> (f64, f64, f64) {
    (s.mu_w, s.mu_lambda, s.mu_h)
}

/// Picks the candidate with the lowest mean pilot BER; ties go to the
/// lexicographically smallest `(μ_w, μ_λ, μ_h)`.
pub fn optimize_step_sizes(
    scn: &Scenario,
    kind: ReceiverKind,
    grid: &StepGrid,
    settings: &RunSettings,
    pilot_seeds: &[u64],
    parallel: bool,
) -> Result<StepChoice> {
    let cands = candidates(kind, grid);
    if cands.len() == 1 {
        return Ok(StepChoice {
            steps: cands[0],
            pilot_ber: f64::NAN,
        });
    }
    let pilots = pilot_seeds
        .iter()
        .map(|&s| generate_trial(scn, s))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|c| (0..pilots.len()).map(move |p| (c, p)))
        .collect();
    let eval = |&(c, p): &(usize, usize)| run_receiver(&pilots[p], kind, cands[c], settings).map(|m| m.ber_final);
    let bers: Vec<f64> = if parallel {
        jobs.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        jobs.iter().map(eval).collect::<Result<_>>()?
    };
    let mut best: Option<StepChoice> = None;
    for (c, steps) in cands.iter().enumerate() {
        let slice = &bers[c * pilots.len()..(c + 1) * pilots.len()];
        let mean = slice.iter().sum::<f64>() / slice.len() as f64;
        let better = match &best {
            None => true,
            Some(b) => mean < b.pilot_ber || (mean == b.pilot_ber && steps_key(steps) < steps_key(&b.steps)),
        };
        if better {
            best = Some(StepChoice {
                steps: *steps,
                pilot_ber: mean,
            });
        }
    }
    Ok(best.expect("non-empty candidate list"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::ExperimentConfig;

    #[test]
    fn candidate_dimensions_per_receiver() {
        let grid = StepGrid::default_for(ReceiverKind::JoSic);
        assert_eq!(candidates(ReceiverKind::Linear, &grid).len(), 3);
        assert_eq!(candidates(ReceiverKind::Sic, &grid).len(), 9);
        assert_eq!(candidates(ReceiverKind::JoPic, &grid).len(), 27);
    }

    #[test]
    fn singleton_grid_is_returned() {
        let cfg = ExperimentConfig::default();
        let scn = Scenario::from_config(&cfg, 2, 10.0).unwrap();
        let steps = StepSizes::new(0.01, 0.02, 0.03).unwrap();
        let got = optimize_step_sizes(
            &scn,
            ReceiverKind::JoSic,
            &StepGrid::single(steps),
            &RunSettings::from_config(&cfg),
            &[1, 2],
            false,
        )
        .unwrap();
        assert_eq!(got.steps, steps);
    }

    #[test]
    fn divergent_filter_step_is_never_chosen() {
        let mut cfg = ExperimentConfig::default();
        cfg.packet_len = 400;
        let scn = Scenario::from_config(&cfg, 4, 10.0).unwrap();
        let grid = StepGrid {
            mu_w: vec![0.005, 10.0],
            mu_lambda: vec![0.005],
            mu_h: vec![0.005],
        };
        let got = optimize_step_sizes(&scn, ReceiverKind::Linear, &grid, &RunSettings::from_config(&cfg), &[5, 6, 7], false)
            .unwrap();
        assert_eq!(got.steps.mu_w, 0.005);
        assert!(got.pilot_ber < 0.4);
    }
}
