use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{lin_bandit_update, lints_select, linucb_select, LinBanditState};
use super::nig::{nig_ts_select, nig_update, NIGPosterior, NigSelectMode};
use super::BanditError;
use crate::numerics::RngStream;
use crate::simulators::{MrtAgent, MrtObservation, SimError};

/// Immediate regret of a pulled arm against the best true mean:
/// `max_a μ_a − μ_chosen`. Invariant under shifting every mean by a
/// constant.
pub fn immediate_regret(true_means: &[f64], chosen: usize) -> f64 {
    let best = true_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    best - true_means[chosen]
}

/// What to do when the online loop observes a missing reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingRewardMode {
    /// Leave the statistics untouched — the conservative default.
    Skip,
    /// Impute the last observed reward (0 before any observation), as used
    /// during data collection in message-based trials.
    Locf,
}

/// Algorithm-specific sufficient statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentState {
    Uniform { arms: usize },
    LinUcb { state: LinBanditState, alpha: f64 },
    LinTs { state: LinBanditState, nu: f64 },
    NigTs { posterior: NIGPosterior },
}

/// An online agent: algorithm state plus burn-in and missing-reward policy.
/// Snapshots serialize to structured text for resume-and-replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineAgent {
    pub state: AgentState,
    pub burn_in: usize,
    pub missing_mode: MissingRewardMode,
    steps: u64,
    last_observed: Option<f64>,
}

impl OnlineAgent {
    pub fn new(state: AgentState) -> Self {
        Self {
            state,
            burn_in: 0,
            missing_mode: MissingRewardMode::Skip,
            steps: 0,
            last_observed: None,
        }
    }

    pub fn with_burn_in(mut self, steps: usize) -> Self {
        self.burn_in = steps;
        self
    }

    pub fn with_missing_mode(mut self, mode: MissingRewardMode) -> Self {
        self.missing_mode = mode;
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Pick an arm for the given per-arm features; returns the arm and the
    /// probability to log (uniform during burn-in, 1.0 for the
    /// deterministic-given-state selections).
    pub fn select(
        &mut self,
        arm_features: &[Vec<f64>],
        rng: &mut RngStream,
    ) -> Result<(usize, f64), BanditError> {
        if arm_features.is_empty() {
            return Err(BanditError::NoArms);
        }
        let k = arm_features.len();
        let choice = if (self.steps as usize) < self.burn_in {
            (rng.random_range(0..k), 1.0 / k as f64)
        } else {
            match &self.state {
                AgentState::Uniform { arms } => {
                    if *arms != k {
                        return Err(BanditError::Schema(format!(
                            "agent configured for {arms} arms, environment has {k}"
                        )));
                    }
                    (rng.random_range(0..k), 1.0 / k as f64)
                }
                AgentState::LinUcb { state, alpha } => {
                    (linucb_select(state, arm_features, *alpha)?.0, 1.0)
                }
                AgentState::LinTs { state, nu } => {
                    (lints_select(state, arm_features, *nu, rng)?, 1.0)
                }
                AgentState::NigTs { posterior } => (
                    nig_ts_select(posterior, arm_features, NigSelectMode::PosteriorDraw, rng)?,
                    1.0,
                ),
            }
        };
        self.steps += 1;
        Ok(choice)
    }

    /// Feed back the (possibly missing) reward for the chosen arm.
    pub fn update(&mut self, features: &[f64], reward: Option<f64>) -> Result<(), BanditError> {
        let y = match reward {
            Some(y) => {
                self.last_observed = Some(y);
                y
            }
            None => match self.missing_mode {
                MissingRewardMode::Skip => return Ok(()),
                MissingRewardMode::Locf => self.last_observed.unwrap_or(0.0),
            },
        };
        match &mut self.state {
            AgentState::Uniform { .. } => {}
            AgentState::LinUcb { state, .. } | AgentState::LinTs { state, .. } => {
                lin_bandit_update(state, features, y)?;
            }
            AgentState::NigTs { posterior } => {
                *posterior = nig_update(posterior, std::slice::from_ref(&features.to_vec()), &[y])?;
            }
        }
        Ok(())
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("agent state serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, BanditError> {
        serde_json::from_str(text)
            .map_err(|e| BanditError::InvalidParameter(format!("snapshot parse: {e}")))
    }
}

impl MrtAgent for OnlineAgent {
    fn select(
        &mut self,
        obs: &MrtObservation,
        rng: &mut RngStream,
    ) -> Result<(usize, f64), SimError> {
        OnlineAgent::select(self, obs.arm_features, rng).map_err(|e| SimError::Agent(e.to_string()))
    }

    fn observe(&mut self, _arm: usize, features: &[f64], reward: Option<f64>) {
        // Statistics updates only fail on dimension mismatch, which select
        // has already vetted for the same feature layout.
        let _ = OnlineAgent::update(self, features, reward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_zero_for_optimal_arm() {
        assert_eq!(immediate_regret(&[1.0, 0.4], 0), 0.0);
    }

    #[test]
    fn regret_hand_subtraction() {
        assert_eq!(immediate_regret(&[1.0, 0.4], 1), 0.6);
    }

    #[test]
    fn regret_invariant_to_mean_shift() {
        let means = [0.3, 1.1, -0.4];
        let shifted: Vec<f64> = means.iter().map(|m| m + 42.0).collect();
        for arm in 0..3 {
            assert!(
                (immediate_regret(&means, arm) - immediate_regret(&shifted, arm)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn burn_in_reports_uniform_probability() {
        let state = LinBanditState::new(1, 1.0).unwrap();
        let mut agent =
            OnlineAgent::new(AgentState::LinUcb { state, alpha: 1.0 }).with_burn_in(3);
        let features = vec![vec![1.0], vec![2.0]];
        let mut rng = RngStream::new(0, 0);
        for _ in 0..3 {
            let (_, p) = agent.select(&features, &mut rng).unwrap();
            assert_eq!(p, 0.5);
        }
        let (_, p) = agent.select(&features, &mut rng).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn skip_mode_leaves_statistics_untouched() {
        let state = LinBanditState::new(1, 1.0).unwrap();
        let mut agent = OnlineAgent::new(AgentState::LinUcb { state, alpha: 0.0 });
        let before = agent.clone();
        agent.update(&[1.0], None).unwrap();
        assert_eq!(agent.state, before.state);
    }

    #[test]
    fn locf_mode_imputes_last_observed_reward() {
        let make = || OnlineAgent::new(AgentState::LinUcb {
            state: LinBanditState::new(1, 1.0).unwrap(),
            alpha: 0.0,
        })
        .with_missing_mode(MissingRewardMode::Locf);

        let mut locf = make();
        locf.update(&[1.0], Some(2.0)).unwrap();
        locf.update(&[1.0], None).unwrap();

        let mut explicit = make();
        explicit.update(&[1.0], Some(2.0)).unwrap();
        explicit.update(&[1.0], Some(2.0)).unwrap();
        assert_eq!(locf.state, explicit.state);

        // Leading gap imputes 0 — the statistics only gain a feature outer
        // product, not reward mass.
        let mut leading = make();
        leading.update(&[1.0], None).unwrap();
        if let AgentState::LinUcb { state, .. } = &leading.state {
            assert_eq!(state.steps(), 1);
            assert_eq!(state.mean_estimate().unwrap()[0], 0.0);
        } else {
            unreachable!()
        }
    }

    #[test]
    fn snapshot_roundtrip_resumes_identically() {
        let mut agent = OnlineAgent::new(AgentState::LinTs {
            state: LinBanditState::new(2, 1.0).unwrap(),
            nu: 0.7,
        });
        let features = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut rng = RngStream::new(5, 9);
        for i in 0..10 {
            let (arm, _) = agent.select(&features, &mut rng).unwrap();
            agent.update(&features[arm], Some(i as f64 * 0.1)).unwrap();
        }
        let snapshot = agent.snapshot_json();
        let mut restored = OnlineAgent::from_snapshot_json(&snapshot).unwrap();
        assert_eq!(agent, restored);

        // Replays from the same stream state agree.
        let mut rng_a = RngStream::new(77, 0);
        let mut rng_b = RngStream::new(77, 0);
        for _ in 0..20 {
            let a = agent.select(&features, &mut rng_a).unwrap();
            let b = restored.select(&features, &mut rng_b).unwrap();
            assert_eq!(a, b);
            agent.update(&features[a.0], Some(1.0)).unwrap();
            restored.update(&features[b.0], Some(1.0)).unwrap();
        }
        assert_eq!(agent, restored);
    }
}
