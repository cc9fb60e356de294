use serde::{Deserialize, Serialize};

use super::DirectError;
use crate::core::{Dataset, PolicyKind, PolicySpec, Trajectory};

/// Point estimate plus the weight diagnostics that tell you whether to
/// trust it: the spread of the importance weights and the effective sample
/// size (Σw)²/Σw².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub point: f64,
    pub weight_min: f64,
    pub weight_mean: f64,
    pub weight_max: f64,
    pub n_effective: f64,
}

/// w_{d,π} for one trajectory: the product over stages of
/// `1[A_t = d_t(H_t)] / π_t` for deterministic targets and
/// `d(A_t | H_t) / π_t` for stochastic ones. The two forms agree when the
/// stochastic policy is degenerate.
fn trajectory_weight(traj: &Trajectory, target: &PolicySpec) -> Result<f64, DirectError> {
    let mut w = 1.0;
    for (t, rec) in traj.records.iter().enumerate() {
        let hist = traj.history(t);
        let numerator = match target.kind() {
            PolicyKind::Deterministic => {
                if target.decide(t, &hist)? == rec.action {
                    1.0
                } else {
                    0.0
                }
            }
            PolicyKind::Stochastic => target.action_prob(t, &hist, rec.action)?,
        };
        if numerator == 0.0 {
            return Ok(0.0);
        }
        if rec.behavior_prob <= 0.0 {
            return Err(DirectError::Positivity {
                unit: traj.unit_id.clone(),
                stage: t,
                prob: rec.behavior_prob,
            });
        }
        w *= numerator / rec.behavior_prob;
    }
    Ok(w)
}

fn weights_and_outcomes(
    data: &Dataset,
    target: &PolicySpec,
) -> Result<(Vec<f64>, Vec<f64>), DirectError> {
    let mut weights = Vec::with_capacity(data.n_units());
    let mut outcomes = Vec::with_capacity(data.n_units());
    for traj in &data.trajectories {
        let w = trajectory_weight(traj, target)?;
        // Unmatched trajectories contribute zero regardless of outcome, so a
        // missing reward there is harmless.
        let y = if w == 0.0 { 0.0 } else { traj.total_reward()? };
        weights.push(w);
        outcomes.push(y);
    }
    Ok((weights, outcomes))
}

fn summarize(weights: &[f64], point: f64) -> ValueEstimate {
    let n = weights.len() as f64;
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    ValueEstimate {
        point,
        weight_min: weights.iter().cloned().fold(f64::INFINITY, f64::min),
        weight_mean: sum / n,
        weight_max: weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        n_effective: if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 },
    }
}

/// Monte Carlo value estimator: P_N[w_{d,π} · Y].
pub fn estimate_value_mc(
    data: &Dataset,
    target: &PolicySpec,
) -> Result<ValueEstimate, DirectError> {
    let (weights, outcomes) = weights_and_outcomes(data, target)?;
    let n = weights.len() as f64;
    let point = weights
        .iter()
        .zip(outcomes.iter())
        .map(|(w, y)| w * y)
        .sum::<f64>()
        / n;
    Ok(summarize(&weights, point))
}

/// Self-normalized estimator: P_N[wY] / P_N[w]. Stabilizes the MC
/// estimator; exact for the behavior policy where every weight is one.
pub fn estimate_value_iptw(
    data: &Dataset,
    target: &PolicySpec,
) -> Result<ValueEstimate, DirectError> {
    let (weights, outcomes) = weights_and_outcomes(data, target)?;
    let sum_w: f64 = weights.iter().sum();
    if sum_w == 0.0 {
        return Err(DirectError::DegenerateOverlap);
    }
    let sum_wy: f64 = weights
        .iter()
        .zip(outcomes.iter())
        .map(|(w, y)| w * y)
        .sum();
    let point = sum_wy / sum_w;
    Ok(summarize(&weights, point))
}

/// Doubly robust estimator for a single-stage regime over binary arms.
///
/// `outcome_model(a, h)` predicts E[Y | H = h, A = a] and
/// `propensity_model(a, h)` the behavior probability of arm `a`; both are
/// evaluated at the regime's recommended arm, composing the augmented term
/// so that the estimate stays consistent when either model is correct.
pub fn estimate_value_aiptw(
    data: &Dataset,
    target: &PolicySpec,
    outcome_model: &dyn Fn(usize, &[f64]) -> f64,
    propensity_model: &dyn Fn(usize, &[f64]) -> f64,
) -> Result<ValueEstimate, DirectError> {
    let mut weights = Vec::with_capacity(data.n_units());
    let mut total = 0.0;
    for traj in &data.trajectories {
        if traj.len() != 1 {
            return Err(DirectError::UnsupportedData(
                "the doubly robust estimator handles single-stage data".into(),
            ));
        }
        let rec = &traj.records[0];
        let hist = traj.history(0);
        let recommended = target.decide(0, &hist)?;
        let pi = propensity_model(recommended, &rec.state);
        if !(pi > 0.0 && pi < 1.0) {
            return Err(DirectError::Positivity {
                unit: traj.unit_id.clone(),
                stage: 0,
                prob: pi,
            });
        }
        let matched = rec.action == recommended;
        let indicator = if matched { 1.0 } else { 0.0 };
        let w = indicator / pi;
        let y = if matched { traj.total_reward()? } else { 0.0 };
        let mu = outcome_model(recommended, &rec.state);
        total += w * y - (indicator - pi) / pi * mu;
        weights.push(w);
    }
    let point = total / data.n_units() as f64;
    Ok(summarize(&weights, point))
}
