use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::recovery::RecoveryContext;
use super::SimError;
use crate::core::{
    Dataset, DatasetSchema, History, PolicySpec, StageRecord, StageSchema, Trajectory,
};
use crate::numerics::RngStream;

/// Micro-randomized trial generative model with recovery-context dynamics.
///
/// Each user is randomized once per day for `horizon` days. The mean reward
/// of arm `j` on a day with context `x` and recovery context `z̄` is
///
/// ```text
/// arm_effects[j] + context_coefs·x + habituation_coefs[j]·z̄_j
/// ```
///
/// where `z̄_j = z_max − (days since arm j was played)`: a recently played
/// arm carries high `z̄`, so a negative habituation coefficient models the
/// reward loss from repeating the same message category. Contexts are drawn
/// i.i.d. standard normal each day. The "send nothing" option, when wanted,
/// is modeled as an ordinary arm with its own recovery entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrtConfig {
    pub n_arms: usize,
    pub horizon: usize,
    pub z_max: u32,
    pub context_dim: usize,
    pub arm_effects: Vec<f64>,
    pub context_coefs: Vec<f64>,
    pub habituation_coefs: Vec<f64>,
    pub noise_sd: f64,
    pub missing_prob: f64,
    /// Days of forced uniform randomization at the start of each user's run.
    pub burn_in_days: usize,
    /// Mirror of the "zero step counts are device errors" rule: emit a
    /// reward equal to exactly 0 as missing.
    pub zero_reward_missing: bool,
}

impl MrtConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if self.n_arms == 0 {
            problems.push("n_arms must be at least 1".to_string());
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if self.z_max == 0 {
            problems.push("z_max must be at least 1".to_string());
        }
        if self.arm_effects.len() != self.n_arms {
            problems.push(format!(
                "arm_effects has length {}, expected {}",
                self.arm_effects.len(),
                self.n_arms
            ));
        }
        if self.context_coefs.len() != self.context_dim {
            problems.push(format!(
                "context_coefs has length {}, expected {}",
                self.context_coefs.len(),
                self.context_dim
            ));
        }
        if self.habituation_coefs.len() != self.n_arms {
            problems.push(format!(
                "habituation_coefs has length {}, expected {}",
                self.habituation_coefs.len(),
                self.n_arms
            ));
        }
        if !(self.missing_prob >= 0.0 && self.missing_prob < 1.0) {
            problems.push(format!(
                "missing_prob must lie in [0, 1), got {}",
                self.missing_prob
            ));
        }
        if !(self.noise_sd >= 0.0) {
            problems.push(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(problems.join("; ")))
        }
    }

    /// Per-arm feature dimension: arm one-hot, context, arm-slotted z̄.
    pub fn feature_dim(&self) -> usize {
        2 * self.n_arms + self.context_dim
    }

    pub fn true_mean(&self, x: &[f64], arm: usize, z_bar: f64) -> f64 {
        let ctx: f64 = x
            .iter()
            .zip(self.context_coefs.iter())
            .map(|(a, b)| a * b)
            .sum();
        self.arm_effects[arm] + ctx + self.habituation_coefs[arm] * z_bar
    }

    pub fn true_means(&self, x: &[f64], recovery: &RecoveryContext) -> Vec<f64> {
        (0..self.n_arms)
            .map(|a| self.true_mean(x, a, recovery.z_bar(a)))
            .collect()
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema::fixed(vec![
            StageSchema {
                state_dim: self.context_dim,
                action_arity: self.n_arms,
            };
            self.horizon
        ])
    }
}

/// Canonical per-arm feature layout f(x, a, z̄_a): arm one-hot, shared
/// context block, then z̄_a in the arm's own slot. The true coefficient
/// vector under [`MrtConfig`] is `[arm_effects…, context_coefs…,
/// habituation_coefs…]`.
pub fn mrt_arm_features(x: &[f64], arm: usize, z_bar: f64, n_arms: usize) -> Vec<f64> {
    let mut f = vec![0.0; 2 * n_arms + x.len()];
    f[arm] = 1.0;
    f[n_arms..n_arms + x.len()].copy_from_slice(x);
    f[n_arms + x.len() + arm] = z_bar;
    f
}

/// What an agent sees at one decision point.
pub struct MrtObservation<'a> {
    pub day: usize,
    pub context: &'a [f64],
    pub arm_features: &'a [Vec<f64>],
}

/// Anything that can drive the MRT loop: fixed randomization policies and
/// online bandit agents alike. `select` returns the chosen arm together
/// with the probability the caller should log as `behavior_prob`;
/// deterministic selections report 1.0.
pub trait MrtAgent {
    fn select(&mut self, obs: &MrtObservation, rng: &mut RngStream)
        -> Result<(usize, f64), SimError>;

    /// Reward feedback for the chosen arm; `None` is a missing reward.
    fn observe(&mut self, arm: usize, features: &[f64], reward: Option<f64>);
}

/// A fixed [`PolicySpec`] driving the MRT loop; the policy sees the daily
/// context as its feature vector.
pub struct PolicyAgent {
    policy: PolicySpec,
}

impl PolicyAgent {
    pub fn new(policy: PolicySpec) -> Self {
        Self { policy }
    }
}

impl MrtAgent for PolicyAgent {
    fn select(
        &mut self,
        obs: &MrtObservation,
        rng: &mut RngStream,
    ) -> Result<(usize, f64), SimError> {
        let hist = History::stateless(obs.context);
        let probs = self.policy.action_probs(0, &hist)?;
        if probs.len() != obs.arm_features.len() {
            return Err(SimError::Agent(format!(
                "policy emits {} arms, environment has {}",
                probs.len(),
                obs.arm_features.len()
            )));
        }
        let (arm, p) = self.policy.sample_action(0, &hist, rng)?;
        Ok((arm, p))
    }

    fn observe(&mut self, _arm: usize, _features: &[f64], _reward: Option<f64>) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub user: usize,
    pub day: usize,
    pub chosen_arm: usize,
    pub regret: f64,
    pub cum_regret: f64,
}

pub type RegretTrace = Vec<RegretRow>;

pub fn write_regret_csv<W: Write>(trace: &RegretTrace, writer: W) -> Result<(), crate::core::CoreError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user", "day", "chosen_arm", "regret", "cum_regret"])?;
    for row in trace {
        w.write_record(&[
            row.user.to_string(),
            row.day.to_string(),
            row.chosen_arm.to_string(),
            format!("{}", row.regret),
            format!("{}", row.cum_regret),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run the MRT loop for `n_users` independent users, a fresh agent per user
/// (no cross-user pooling). Returns the logged dataset and the per-step
/// regret trace against the true means.
///
/// During the first `burn_in_days` the simulator assigns arms uniformly at
/// random with `behavior_prob = 1/K` and still feeds rewards to the agent.
pub fn simulate_mrt(
    cfg: &MrtConfig,
    agent_for_user: &mut dyn FnMut(usize) -> Box<dyn MrtAgent>,
    n_users: usize,
    rng: &RngStream,
) -> Result<(Dataset, RegretTrace), SimError> {
    cfg.validate()?;
    if n_users == 0 {
        return Err(SimError::InvalidConfig("n_users must be at least 1".into()));
    }
    let k = cfg.n_arms;
    let mut trajectories = Vec::with_capacity(n_users);
    let mut trace = Vec::with_capacity(n_users * cfg.horizon);

    for user in 0..n_users {
        let mut stream = rng.substream(user as u64);
        let mut agent = agent_for_user(user);
        let mut recovery = RecoveryContext::fully_rested(k, cfg.z_max);
        let mut records = Vec::with_capacity(cfg.horizon);
        let mut cum_regret = 0.0;

        for day in 0..cfg.horizon {
            let x: Vec<f64> = (0..cfg.context_dim)
                .map(|_| stream.sample::<f64, _>(StandardNormal))
                .collect();
            let arm_features: Vec<Vec<f64>> = (0..k)
                .map(|a| mrt_arm_features(&x, a, recovery.z_bar(a), k))
                .collect();
            let obs = MrtObservation {
                day,
                context: &x,
                arm_features: &arm_features,
            };

            let (arm, prob) = if day < cfg.burn_in_days {
                (stream.random_range(0..k), 1.0 / k as f64)
            } else {
                let (arm, prob) = agent.select(&obs, &mut stream)?;
                if arm >= k {
                    return Err(SimError::ArmOutOfRange { arm, arms: k });
                }
                (arm, prob)
            };

            let means = cfg.true_means(&x, &recovery);
            let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let regret = best - means[arm];
            cum_regret += regret;
            trace.push(RegretRow {
                user,
                day,
                chosen_arm: arm,
                regret,
                cum_regret,
            });

            let noise: f64 = stream.sample::<f64, _>(StandardNormal);
            let y = means[arm] + cfg.noise_sd * noise;
            let dropout: f64 = stream.random();
            let reward = if dropout < cfg.missing_prob || (cfg.zero_reward_missing && y == 0.0) {
                None
            } else {
                Some(y)
            };

            records.push(StageRecord::new(x, arm, reward, prob));
            agent.observe(arm, &arm_features[arm], reward);
            recovery = recovery.after_action(arm)?;
        }
        trajectories.push(Trajectory::new(format!("u{user}"), records));
    }

    let dataset = Dataset::new(cfg.schema(), trajectories)?;
    Ok((dataset, trace))
}

/// [`simulate_mrt`] with a fixed randomization policy shared by all users.
pub fn simulate_mrt_policy(
    cfg: &MrtConfig,
    policy: &PolicySpec,
    n_users: usize,
    rng: &RngStream,
) -> Result<(Dataset, RegretTrace), SimError> {
    let policy = policy.clone();
    simulate_mrt(
        cfg,
        &mut move |_user| Box::new(PolicyAgent::new(policy.clone())) as Box<dyn MrtAgent>,
        n_users,
        rng,
    )
}
