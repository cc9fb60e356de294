use serde::{Deserialize, Serialize};

use super::DirectError;
use crate::core::{Dataset, FeatureMap, History, HorizonKind, StageRule};

/// Linear decision function for two arms coded ±1: the decision is
/// sign(intercept + coefs·φ(h)) with sign(0) = −1. Dataset actions map as
/// 0 ↦ −1 and 1 ↦ +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecisionFn {
    pub feature_map: FeatureMap,
    pub coefs: Vec<f64>,
    pub intercept: f64,
    /// Shift added to outcomes during preprocessing to make them
    /// nonnegative; 0 when none was needed. The shift changes the OWL
    /// solution, so it travels with the fit.
    pub outcome_shift: f64,
}

impl LinearDecisionFn {
    pub fn score(&self, hist: &History) -> f64 {
        let phi = self.feature_map.apply(hist);
        self.intercept
            + phi
                .iter()
                .zip(self.coefs.iter())
                .map(|(x, c)| x * c)
                .sum::<f64>()
    }

    /// +1 or −1; zero scores resolve to −1.
    pub fn sign(&self, hist: &History) -> i8 {
        if self.score(hist) > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Arm index under the 0/1 coding.
    pub fn decide_arm(&self, hist: &History) -> usize {
        if self.sign(hist) > 0 {
            1
        } else {
            0
        }
    }

    pub fn to_stage_rule(&self) -> StageRule {
        StageRule::SignLinear {
            feature_map: self.feature_map.clone(),
            coefs: self.coefs.clone(),
            intercept: self.intercept,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OwlOptions {
    pub lambda: f64,
    pub max_iters: usize,
    /// Base step: iteration k uses step_scale/√(k+1) along the normalized
    /// subgradient.
    pub step_scale: f64,
    /// Slack added when shifting negative outcomes to keep weights positive.
    pub shift_epsilon: f64,
}

impl Default for OwlOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iters: 10_000,
            step_scale: 1.0,
            shift_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OwlFit {
    pub decision: LinearDecisionFn,
    /// Best objective seen up to each iteration — non-increasing by
    /// construction of the best-iterate rule.
    pub objective_trace: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct BowlFit {
    pub stages: Vec<LinearDecisionFn>,
    /// Trajectories retained at each stage (stage order); monotone
    /// nondecreasing in the stage index because earlier stages filter more.
    pub retained: Vec<usize>,
    pub outcome_shift: f64,
}

/// Outcome-weighted learning on a single-stage dataset with two arms:
/// minimize P_N[(Y/π)·hinge(A·f(H))] + λ‖f‖² by deterministic subgradient
/// descent with diminishing steps, returning the best iterate. The
/// intercept is unpenalized. Negative outcomes are shifted up front by
/// −min(Y) + ε and the shift is reported on the fit.
pub fn owl_fit(
    data: &Dataset,
    feature_map: &FeatureMap,
    opts: &OwlOptions,
) -> Result<OwlFit, DirectError> {
    check_binary_stage(data, 1)?;
    let mut outcomes = Vec::with_capacity(data.n_units());
    for traj in &data.trajectories {
        outcomes.push(traj.total_reward()?);
    }
    let shift = required_shift(&outcomes, opts.shift_epsilon);
    let mut features = Vec::with_capacity(data.n_units());
    let mut labels = Vec::with_capacity(data.n_units());
    let mut weights = Vec::with_capacity(data.n_units());
    for (traj, y) in data.trajectories.iter().zip(outcomes.iter()) {
        let rec = &traj.records[0];
        features.push(feature_map.apply(&traj.history(0)));
        labels.push(arm_to_label(rec.action));
        weights.push((y + shift) / rec.behavior_prob);
    }
    let (coefs, intercept, trace) = weighted_hinge_descent(&features, &labels, &weights, opts)?;
    let objective = *trace.last().expect("descent records at least one value");
    Ok(OwlFit {
        decision: LinearDecisionFn {
            feature_map: feature_map.clone(),
            coefs,
            intercept,
            outcome_shift: shift,
        },
        objective_trace: trace,
        objective,
    })
}

/// Backward outcome-weighted learning over a fixed horizon: stage t keeps
/// only the trajectories whose later actions already follow the fitted
/// later-stage rules, weights the (shifted) outcome by the inverse product
/// of behavior probabilities from stage t on, and solves the same weighted
/// hinge problem. The last stage filters nothing (empty product convention)
/// and therefore coincides with a plain OWL fit of that stage.
pub fn bowl_fit(
    data: &Dataset,
    feature_maps: &[FeatureMap],
    lambdas: &[f64],
    opts: &OwlOptions,
) -> Result<BowlFit, DirectError> {
    let t_max = match data.schema.horizon {
        HorizonKind::Fixed(t) => t,
        HorizonKind::Indefinite => {
            return Err(DirectError::UnsupportedData(
                "backward OWL requires a fixed horizon".into(),
            ))
        }
    };
    if feature_maps.len() != t_max || lambdas.len() != t_max {
        return Err(DirectError::InvalidParameter(format!(
            "need one feature map and one lambda per stage ({t_max})"
        )));
    }
    for t in 0..t_max {
        if data.schema.stage(t).action_arity != 2 {
            return Err(DirectError::UnsupportedData(
                "outcome-weighted learning handles two arms per stage".into(),
            ));
        }
    }

    let mut outcomes = Vec::with_capacity(data.n_units());
    for traj in &data.trajectories {
        outcomes.push(traj.total_reward()?);
    }
    let shift = required_shift(&outcomes, opts.shift_epsilon);

    let mut fitted: Vec<Option<LinearDecisionFn>> = vec![None; t_max];
    let mut retained_counts = vec![0usize; t_max];
    for t in (0..t_max).rev() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        'traj: for (traj, y) in data.trajectories.iter().zip(outcomes.iter()) {
            for tau in (t + 1)..t_max {
                let rule = fitted[tau].as_ref().expect("later stage already fitted");
                if rule.decide_arm(&traj.history(tau)) != traj.records[tau].action {
                    continue 'traj;
                }
            }
            let mut denom = 1.0;
            for tau in t..t_max {
                denom *= traj.records[tau].behavior_prob;
            }
            features.push(feature_maps[t].apply(&traj.history(t)));
            labels.push(arm_to_label(traj.records[t].action));
            weights.push((y + shift) / denom);
        }
        retained_counts[t] = features.len();
        if features.is_empty() {
            return Err(DirectError::SampleDepletion {
                stage: t,
                retained: retained_counts[t..].to_vec(),
            });
        }
        let stage_opts = OwlOptions {
            lambda: lambdas[t],
            ..*opts
        };
        let (coefs, intercept, _) =
            weighted_hinge_descent(&features, &labels, &weights, &stage_opts)?;
        fitted[t] = Some(LinearDecisionFn {
            feature_map: feature_maps[t].clone(),
            coefs,
            intercept,
            outcome_shift: shift,
        });
    }

    Ok(BowlFit {
        stages: fitted.into_iter().map(|f| f.unwrap()).collect(),
        retained: retained_counts,
        outcome_shift: shift,
    })
}

fn arm_to_label(action: usize) -> f64 {
    if action == 1 {
        1.0
    } else {
        -1.0
    }
}

fn required_shift(outcomes: &[f64], epsilon: f64) -> f64 {
    let min = outcomes.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        -min + epsilon
    } else {
        0.0
    }
}

fn check_binary_stage(data: &Dataset, expect_t: usize) -> Result<(), DirectError> {
    match data.schema.horizon {
        HorizonKind::Fixed(t) if t == expect_t => {}
        _ => {
            return Err(DirectError::UnsupportedData(format!(
                "expected a fixed horizon of {expect_t} stage(s)"
            )))
        }
    }
    if data.schema.stage(0).action_arity != 2 {
        return Err(DirectError::UnsupportedData(
            "outcome-weighted learning handles two arms".into(),
        ));
    }
    Ok(())
}

/// Shared core: minimize mean_i[w_i·max(1 − l_i·(c·φ_i + b), 0)] + λ‖c‖²
/// over (c, b) with b unpenalized. Deterministic subgradient descent from
/// the origin, step step_scale/√(k+1) along the normalized subgradient,
/// best iterate kept. Returns (coefs, intercept, best-so-far trace).
pub(crate) fn weighted_hinge_descent(
    features: &[Vec<f64>],
    labels: &[f64],
    weights: &[f64],
    opts: &OwlOptions,
) -> Result<(Vec<f64>, f64, Vec<f64>), DirectError> {
    if !(opts.lambda > 0.0) {
        return Err(DirectError::InvalidParameter(format!(
            "owl lambda must be positive, got {}",
            opts.lambda
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(DirectError::InvalidParameter(
            "hinge weights must be nonnegative (shift outcomes first)".into(),
        ));
    }
    let n = features.len();
    let dim = features.first().map(|f| f.len()).unwrap_or(0);
    let mut coefs = vec![0.0; dim];
    let mut intercept = 0.0;

    let objective = |c: &[f64], b: f64| -> f64 {
        let mut loss = 0.0;
        for i in 0..n {
            let margin = labels[i]
                * (b + features[i]
                    .iter()
                    .zip(c.iter())
                    .map(|(x, v)| x * v)
                    .sum::<f64>());
            loss += weights[i] * (1.0 - margin).max(0.0);
        }
        loss / n as f64 + opts.lambda * c.iter().map(|v| v * v).sum::<f64>()
    };

    let mut best_obj = objective(&coefs, intercept);
    let mut best = (coefs.clone(), intercept);
    let mut trace = Vec::with_capacity(opts.max_iters + 1);
    trace.push(best_obj);

    for k in 0..opts.max_iters {
        let mut grad = vec![0.0; dim];
        let mut grad_b = 0.0;
        for i in 0..n {
            let margin = labels[i]
                * (intercept
                    + features[i]
                        .iter()
                        .zip(coefs.iter())
                        .map(|(x, v)| x * v)
                        .sum::<f64>());
            if margin < 1.0 {
                let s = -weights[i] * labels[i] / n as f64;
                for (g, x) in grad.iter_mut().zip(features[i].iter()) {
                    *g += s * x;
                }
                grad_b += s;
            }
        }
        for (g, c) in grad.iter_mut().zip(coefs.iter()) {
            *g += 2.0 * opts.lambda * c;
        }
        let norm = (grad.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b)
            .sqrt()
            .max(1e-12);
        let step = opts.step_scale / ((k + 1) as f64).sqrt() / norm;
        for (c, g) in coefs.iter_mut().zip(grad.iter()) {
            *c -= step * g;
        }
        intercept -= step * grad_b;

        let obj = objective(&coefs, intercept);
        if obj < best_obj {
            best_obj = obj;
            best = (coefs.clone(), intercept);
        }
        trace.push(best_obj);
    }

    Ok((best.0, best.1, trace))
}
