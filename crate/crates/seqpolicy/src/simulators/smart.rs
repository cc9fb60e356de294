use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::core::{
    argmax_tie_low, Dataset, DatasetSchema, StageRecord, StageSchema, Trajectory,
};
use crate::numerics::{normal_cdf, normal_pdf, RngStream};

/// Linear mean-outcome model: coefficients on the state, per-arm main
/// effects, and optional per-arm interactions with the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOutcomeModel {
    pub intercept: f64,
    pub state_coefs: Vec<f64>,
    pub arm_effects: Vec<f64>,
    /// Per arm × state component; empty means no interactions.
    #[serde(default)]
    pub interactions: Vec<Vec<f64>>,
}

impl LinearOutcomeModel {
    pub fn n_arms(&self) -> usize {
        self.arm_effects.len()
    }

    pub fn mean(&self, state: &[f64], arm: usize) -> f64 {
        let mut m = self.intercept + self.arm_effects[arm];
        for (x, c) in state.iter().zip(self.state_coefs.iter()) {
            m += x * c;
        }
        if let Some(inter) = self.interactions.get(arm) {
            for (x, c) in state.iter().zip(inter.iter()) {
                m += x * c;
            }
        }
        m
    }

    /// Per-arm coefficient blocks in the `[1, state...]` basis.
    pub fn blocked_coefs(&self) -> Vec<Vec<f64>> {
        (0..self.n_arms())
            .map(|a| {
                let mut block = Vec::with_capacity(1 + self.state_coefs.len());
                block.push(self.intercept + self.arm_effects[a]);
                for (j, &c) in self.state_coefs.iter().enumerate() {
                    let inter = self
                        .interactions
                        .get(a)
                        .and_then(|v| v.get(j))
                        .copied()
                        .unwrap_or(0.0);
                    block.push(c + inter);
                }
                block
            })
            .collect()
    }

    fn validate(&self, state_dim: usize, label: &str, problems: &mut Vec<String>) {
        if self.arm_effects.is_empty() {
            problems.push(format!("{label}: needs at least one arm effect"));
        }
        if self.state_coefs.len() != state_dim {
            problems.push(format!(
                "{label}: state_coefs has length {}, state dimension is {state_dim}",
                self.state_coefs.len()
            ));
        }
        if !self.interactions.is_empty() {
            if self.interactions.len() != self.n_arms() {
                problems.push(format!(
                    "{label}: interactions must have one row per arm ({} vs {})",
                    self.interactions.len(),
                    self.n_arms()
                ));
            }
            for (a, row) in self.interactions.iter().enumerate() {
                if row.len() != state_dim {
                    problems.push(format!(
                        "{label}: interaction row {a} has length {}, expected {state_dim}",
                        row.len()
                    ));
                }
            }
        }
    }
}

/// How a stage assigns arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Randomization {
    /// State-independent probabilities — a randomized trial.
    Fixed(Vec<f64>),
    /// Probabilities soft-max in the state, π(a|x) ∝ exp(xᵀw_a) — the
    /// confounded, observational mode.
    StateSoftmax(Vec<Vec<f64>>),
}

impl Randomization {
    pub fn n_arms(&self) -> usize {
        match self {
            Randomization::Fixed(p) => p.len(),
            Randomization::StateSoftmax(w) => w.len(),
        }
    }

    pub fn probs(&self, state: &[f64]) -> Vec<f64> {
        match self {
            Randomization::Fixed(p) => p.clone(),
            Randomization::StateSoftmax(weights) => {
                let logits: Vec<f64> = weights
                    .iter()
                    .map(|w| state.iter().zip(w.iter()).map(|(x, c)| x * c).sum())
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }

    fn validate(&self, label: &str, problems: &mut Vec<String>) {
        match self {
            Randomization::Fixed(p) => {
                if p.is_empty() {
                    problems.push(format!("{label}: empty randomization probabilities"));
                    return;
                }
                if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) && p.len() > 1 {
                    problems.push(format!(
                        "{label}: randomization probabilities must lie in (0, 1)"
                    ));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    problems.push(format!(
                        "{label}: randomization probabilities sum to {total}, expected 1"
                    ));
                }
            }
            Randomization::StateSoftmax(w) => {
                if w.is_empty() {
                    problems.push(format!("{label}: empty softmax weight list"));
                }
            }
        }
    }
}

/// One stage of a SMART: how arms are assigned and how the outcome is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartStage {
    pub randomization: Randomization,
    pub outcome: LinearOutcomeModel,
    pub noise_sd: f64,
}

impl SmartStage {
    fn validate(&self, state_dim: usize, label: &str, problems: &mut Vec<String>) {
        self.randomization
            .validate(&format!("{label}.randomization"), problems);
        self.outcome
            .validate(state_dim, &format!("{label}.outcome"), problems);
        if self.randomization.n_arms() != self.outcome.n_arms() {
            problems.push(format!(
                "{label}: randomization has {} arms, outcome model has {}",
                self.randomization.n_arms(),
                self.outcome.n_arms()
            ));
        }
        if !(self.noise_sd > 0.0) {
            problems.push(format!("{label}: noise_sd must be positive"));
        }
    }
}

/// Two-stage SMART generative model.
///
/// Baseline covariates are i.i.d. standard normal of dimension `state_dim`.
/// The stage-2 state is `[x..., y1, responder_flag]` where the responder
/// flag is `1.0` when the stage-1 outcome reaches `responder_threshold`.
/// Responders and nonresponders re-randomize under their own branch; with
/// `rerandomize_responders = false` responders deterministically continue
/// on arm 0 of the responder branch (a maintenance arm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartConfig {
    pub state_dim: usize,
    pub stage1: SmartStage,
    pub responder_threshold: f64,
    pub stage2_responders: SmartStage,
    pub stage2_nonresponders: SmartStage,
    pub rerandomize_responders: bool,
}

impl SmartConfig {
    pub fn stage2_state_dim(&self) -> usize {
        self.state_dim + 2
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        self.stage1.validate(self.state_dim, "stage1", &mut problems);
        self.stage2_responders.validate(
            self.stage2_state_dim(),
            "stage2_responders",
            &mut problems,
        );
        self.stage2_nonresponders.validate(
            self.stage2_state_dim(),
            "stage2_nonresponders",
            &mut problems,
        );
        if self.stage2_responders.outcome.n_arms() != self.stage2_nonresponders.outcome.n_arms() {
            problems.push(format!(
                "stage-2 branches must share an arm count ({} vs {})",
                self.stage2_responders.outcome.n_arms(),
                self.stage2_nonresponders.outcome.n_arms()
            ));
        }
        if self.responder_threshold.is_nan() {
            problems.push("responder_threshold must not be NaN".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema::fixed(vec![
            StageSchema {
                state_dim: self.state_dim,
                action_arity: self.stage1.outcome.n_arms(),
            },
            StageSchema {
                state_dim: self.stage2_state_dim(),
                action_arity: self.stage2_responders.outcome.n_arms(),
            },
        ])
    }
}

/// Exact quantities implied by a [`SmartConfig`] — the oracle side of every
/// simulator-based check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmartTruth {
    cfg: SmartConfig,
}

impl SmartTruth {
    pub fn config(&self) -> &SmartConfig {
        &self.cfg
    }

    /// Stage-2 Q-function: the conditional mean outcome itself.
    pub fn q2(&self, state2: &[f64], arm: usize, responder: bool) -> f64 {
        self.branch(responder).outcome.mean(state2, arm)
    }

    pub fn optimal_stage2(&self, state2: &[f64], responder: bool) -> usize {
        if responder && !self.cfg.rerandomize_responders {
            return 0;
        }
        let branch = self.branch(responder);
        let vals: Vec<f64> = (0..branch.outcome.n_arms())
            .map(|a| branch.outcome.mean(state2, a))
            .collect();
        argmax_tie_low(&vals)
    }

    /// Exact stage-1 Q under optimal stage-2 continuation:
    /// E[Y₁ + max_{a₂} Q₂ | x, a₁]. The expectation over the stage-1 outcome
    /// integrates the piecewise-linear upper envelope of the stage-2 arm
    /// means against the normal outcome density, split at the responder
    /// threshold, so it is exact up to floating point.
    pub fn q1(&self, x: &[f64], arm1: usize) -> f64 {
        let m1 = self.cfg.stage1.outcome.mean(x, arm1);
        let sd = self.cfg.stage1.noise_sd;
        let thr = self.cfg.responder_threshold;
        let nonresp = self.branch_lines(x, false);
        let resp = self.branch_lines(x, true);
        m1 + envelope_expectation(&nonresp, f64::NEG_INFINITY, thr, m1, sd)
            + envelope_expectation(&resp, thr, f64::INFINITY, m1, sd)
    }

    pub fn optimal_stage1(&self, x: &[f64]) -> usize {
        let vals: Vec<f64> = (0..self.cfg.stage1.outcome.n_arms())
            .map(|a| self.q1(x, a))
            .collect();
        argmax_tie_low(&vals)
    }

    /// Population responder fraction under state-independent randomization
    /// and standard-normal baselines. `None` when stage-1 assignment is
    /// state-dependent (no closed form is attempted).
    pub fn responder_fraction(&self) -> Option<f64> {
        let probs = match &self.cfg.stage1.randomization {
            Randomization::Fixed(p) => p.clone(),
            Randomization::StateSoftmax(_) => return None,
        };
        let out = &self.cfg.stage1.outcome;
        let thr = self.cfg.responder_threshold;
        let mut frac = 0.0;
        for (a, &pa) in probs.iter().enumerate() {
            let mu = out.intercept + out.arm_effects[a];
            let mut var = self.cfg.stage1.noise_sd.powi(2);
            for (j, &c) in out.state_coefs.iter().enumerate() {
                let inter = out
                    .interactions
                    .get(a)
                    .and_then(|v| v.get(j))
                    .copied()
                    .unwrap_or(0.0);
                var += (c + inter).powi(2);
            }
            frac += pa * (1.0 - normal_cdf((thr - mu) / var.sqrt()));
        }
        Some(frac)
    }

    /// Per-arm stage-2 coefficient blocks in the `[1, state2...]` basis for
    /// the given branch.
    pub fn stage2_blocked_coefs(&self, responder: bool) -> Vec<Vec<f64>> {
        self.branch(responder).outcome.blocked_coefs()
    }

    /// Per-arm stage-1 optimal-Q coefficient blocks in the `[1, x...]`
    /// basis, when Q₁ is exactly linear: a degenerate responder threshold
    /// (±∞) and a stage-2 branch whose arm ordering and outcome slope do
    /// not depend on the realized history (no interactions, or a single
    /// forced arm). Returns `None` otherwise.
    pub fn stage1_q_blocked_coefs(&self) -> Option<Vec<Vec<f64>>> {
        let (responder, flag) = if self.cfg.responder_threshold == f64::NEG_INFINITY {
            (true, 1.0)
        } else if self.cfg.responder_threshold == f64::INFINITY {
            (false, 0.0)
        } else {
            return None;
        };
        let branch = self.branch(responder);
        let out2 = &branch.outcome;
        let p = self.cfg.state_dim;
        let forced = responder && !self.cfg.rerandomize_responders;
        let best2 = if forced {
            0
        } else {
            if !out2.interactions.is_empty()
                && out2.interactions.iter().any(|r| r.iter().any(|&v| v != 0.0))
            {
                return None;
            }
            argmax_tie_low(&out2.arm_effects)
        };
        if forced
            && out2
                .interactions
                .first()
                .map(|r| r.iter().any(|&v| v != 0.0))
                .unwrap_or(false)
        {
            return None;
        }
        // V₂(x, y₁) = c₂ + w₂ᵀx + g·y₁ with the best arm fixed.
        let inter2 = out2.interactions.get(best2);
        let g = out2.state_coefs[p] + inter2.and_then(|r| r.get(p)).copied().unwrap_or(0.0);
        let c2 = out2.intercept
            + out2.arm_effects[best2]
            + (out2.state_coefs[p + 1] + inter2.and_then(|r| r.get(p + 1)).copied().unwrap_or(0.0))
                * flag;
        let w2: Vec<f64> = (0..p)
            .map(|j| {
                out2.state_coefs[j] + inter2.and_then(|r| r.get(j)).copied().unwrap_or(0.0)
            })
            .collect();

        // Q₁(x, a₁) = (1 + g)·m₁(x, a₁) + c₂ + w₂ᵀx.
        let out1 = &self.cfg.stage1.outcome;
        Some(
            (0..out1.n_arms())
                .map(|a| {
                    let mut block = Vec::with_capacity(1 + p);
                    block.push((1.0 + g) * (out1.intercept + out1.arm_effects[a]) + c2);
                    for j in 0..p {
                        let inter1 = out1
                            .interactions
                            .get(a)
                            .and_then(|v| v.get(j))
                            .copied()
                            .unwrap_or(0.0);
                        block.push((1.0 + g) * (out1.state_coefs[j] + inter1) + w2[j]);
                    }
                    block
                })
                .collect(),
        )
    }

    fn branch(&self, responder: bool) -> &SmartStage {
        if responder {
            &self.cfg.stage2_responders
        } else {
            &self.cfg.stage2_nonresponders
        }
    }

    /// Stage-2 arm means as lines in y₁ for a fixed baseline x:
    /// value_a(y) = c_a(x) + g_a · y.
    fn branch_lines(&self, x: &[f64], responder: bool) -> Vec<Line> {
        let branch = self.branch(responder);
        let out = &branch.outcome;
        let p = self.cfg.state_dim;
        let flag = if responder { 1.0 } else { 0.0 };
        let arms: Vec<usize> = if responder && !self.cfg.rerandomize_responders {
            vec![0]
        } else {
            (0..out.n_arms()).collect()
        };
        arms.into_iter()
            .map(|a| {
                let inter = out.interactions.get(a);
                let mut c = out.intercept + out.arm_effects[a];
                for j in 0..p {
                    let ij = inter.and_then(|r| r.get(j)).copied().unwrap_or(0.0);
                    c += (out.state_coefs[j] + ij) * x[j];
                }
                c += (out.state_coefs[p + 1]
                    + inter.and_then(|r| r.get(p + 1)).copied().unwrap_or(0.0))
                    * flag;
                let g =
                    out.state_coefs[p] + inter.and_then(|r| r.get(p)).copied().unwrap_or(0.0);
                Line {
                    intercept: c,
                    slope: g,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    intercept: f64,
    slope: f64,
}

/// E[max_a (c_a + g_a·Y) · 1{lo ≤ Y < hi}] for Y ~ N(m, s²): segment the
/// upper envelope of the lines at their pairwise crossings and integrate
/// each linear piece against the normal density in closed form.
fn envelope_expectation(lines: &[Line], lo: f64, hi: f64, m: f64, s: f64) -> f64 {
    if lines.is_empty() || lo >= hi {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let dg = lines[i].slope - lines[j].slope;
            if dg.abs() > 1e-14 {
                let y = (lines[j].intercept - lines[i].intercept) / dg;
                if y > lo && y < hi {
                    cuts.push(y);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (true, false) => a + 1.0,
            (false, true) => b - 1.0,
            (false, false) => 0.0,
        };
        let vals: Vec<f64> = lines
            .iter()
            .map(|l| l.intercept + l.slope * mid)
            .collect();
        let best = &lines[argmax_tie_low(&vals)];
        total += segment_normal_expectation(best, a, b, m, s);
    }
    total
}

/// ∫_a^b (c + g·y) φ((y−m)/s)/s dy in closed form.
fn segment_normal_expectation(line: &Line, a: f64, b: f64, m: f64, s: f64) -> f64 {
    let alpha = (a - m) / s;
    let beta = (b - m) / s;
    let dphi_cdf = normal_cdf(beta) - normal_cdf(alpha);
    let dpdf = normal_pdf(alpha) - normal_pdf(beta);
    line.intercept * dphi_cdf + line.slope * (m * dphi_cdf + s * dpdf)
}

/// Simulate `n` two-stage trajectories. Each unit draws from its own
/// substream, so the dataset is a pure function of (config, n, stream).
pub fn simulate_smart(
    cfg: &SmartConfig,
    n: usize,
    rng: &RngStream,
) -> Result<(Dataset, SmartTruth), SimError> {
    cfg.validate()?;
    if n == 0 {
        return Err(SimError::InvalidConfig("n must be at least 1".into()));
    }
    let mut trajectories = Vec::with_capacity(n);
    for unit in 0..n {
        let mut stream = rng.substream(unit as u64);
        let x: Vec<f64> = (0..cfg.state_dim)
            .map(|_| stream.sample::<f64, _>(StandardNormal))
            .collect();

        let probs1 = cfg.stage1.randomization.probs(&x);
        let (a1, p1) = sample_categorical(&probs1, &mut stream);
        let noise1: f64 = stream.sample::<f64, _>(StandardNormal);
        let y1 = cfg.stage1.outcome.mean(&x, a1) + cfg.stage1.noise_sd * noise1;
        let responder = y1 >= cfg.responder_threshold;

        let mut state2 = x.clone();
        state2.push(y1);
        state2.push(if responder { 1.0 } else { 0.0 });

        let branch = if responder {
            &cfg.stage2_responders
        } else {
            &cfg.stage2_nonresponders
        };
        let (a2, p2) = if responder && !cfg.rerandomize_responders {
            (0, 1.0)
        } else {
            let probs2 = branch.randomization.probs(&state2);
            sample_categorical(&probs2, &mut stream)
        };
        let noise2: f64 = stream.sample::<f64, _>(StandardNormal);
        let y2 = branch.outcome.mean(&state2, a2) + branch.noise_sd * noise2;

        trajectories.push(Trajectory::new(
            format!("u{unit}"),
            vec![
                StageRecord::new(x, a1, Some(y1), p1),
                StageRecord::new(state2, a2, Some(y2), p2),
            ],
        ));
    }
    let dataset = Dataset::new(cfg.schema(), trajectories)?;
    Ok((dataset, SmartTruth { cfg: cfg.clone() }))
}

pub(crate) fn sample_categorical(probs: &[f64], rng: &mut RngStream) -> (usize, f64) {
    let r: f64 = rng.random();
    let mut cdf = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        cdf += p;
        if r < cdf {
            return (a, p);
        }
    }
    let last = probs.len() - 1;
    (last, probs[last])
}
