use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, History};
use super::{argmax_tie_low, CoreError};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    Deterministic,
    Stochastic,
}

/// One decision rule, applied at a single stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StageRule {
    /// Uniform random over `arms`.
    Uniform { arms: usize },
    /// Always the same arm.
    Fixed { arm: usize, arms: usize },
    /// Soft-max class: π(a_k | h) ∝ exp(−φ(h)ᵀψ_k).
    Softmax {
        feature_map: FeatureMap,
        coefs: Vec<Vec<f64>>,
    },
    /// Deterministic argmax of per-arm linear scores; ties go to the lowest
    /// arm index.
    ArgmaxLinear {
        feature_map: FeatureMap,
        scores: Vec<Vec<f64>>,
    },
    /// Two-arm rule by the sign of `intercept + coefs·φ(h)`: positive picks
    /// arm 1, zero or negative picks arm 0 (sign(0) = −1 convention).
    SignLinear {
        feature_map: FeatureMap,
        coefs: Vec<f64>,
        intercept: f64,
    },
}

impl StageRule {
    pub fn n_arms(&self) -> usize {
        match self {
            StageRule::Uniform { arms } => *arms,
            StageRule::Fixed { arms, .. } => *arms,
            StageRule::Softmax { coefs, .. } => coefs.len(),
            StageRule::ArgmaxLinear { scores, .. } => scores.len(),
            StageRule::SignLinear { .. } => 2,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            StageRule::Uniform { .. } | StageRule::Softmax { .. } => PolicyKind::Stochastic,
            _ => PolicyKind::Deterministic,
        }
    }

    fn action_probs(&self, hist: &History) -> Result<Vec<f64>, CoreError> {
        match self {
            StageRule::Uniform { arms } => Ok(vec![1.0 / *arms as f64; *arms]),
            StageRule::Fixed { arm, arms } => {
                let mut p = vec![0.0; *arms];
                p[*arm] = 1.0;
                Ok(p)
            }
            StageRule::Softmax { feature_map, coefs } => {
                let phi = feature_map.apply(hist);
                let mut logits = Vec::with_capacity(coefs.len());
                for psi in coefs {
                    feature_map.check_coef_len(psi, &phi)?;
                    logits.push(-dot(&phi, psi));
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                Ok(exps.into_iter().map(|e| e / total).collect())
            }
            StageRule::ArgmaxLinear {
                feature_map,
                scores,
            } => {
                let phi = feature_map.apply(hist);
                let mut vals = Vec::with_capacity(scores.len());
                for theta in scores {
                    feature_map.check_coef_len(theta, &phi)?;
                    vals.push(dot(&phi, theta));
                }
                let mut p = vec![0.0; scores.len()];
                p[argmax_tie_low(&vals)] = 1.0;
                Ok(p)
            }
            StageRule::SignLinear {
                feature_map,
                coefs,
                intercept,
            } => {
                let phi = feature_map.apply(hist);
                feature_map.check_coef_len(coefs, &phi)?;
                let f = intercept + dot(&phi, coefs);
                Ok(if f > 0.0 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                })
            }
        }
    }
}

/// A policy: one rule per stage. Indefinite-horizon policies carry a single
/// rule which applies at every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    rules: Vec<StageRule>,
}

impl PolicySpec {
    pub fn new(rules: Vec<StageRule>) -> Self {
        assert!(!rules.is_empty(), "policy needs at least one stage rule");
        Self { rules }
    }

    /// Stationary policy: the same rule at every stage.
    pub fn stationary(rule: StageRule) -> Self {
        Self { rules: vec![rule] }
    }

    pub fn uniform(arms: usize) -> Self {
        Self::stationary(StageRule::Uniform { arms })
    }

    pub fn rule(&self, stage: usize) -> &StageRule {
        &self.rules[stage.min(self.rules.len() - 1)]
    }

    pub fn rules(&self) -> &[StageRule] {
        &self.rules
    }

    pub fn n_stages(&self) -> usize {
        self.rules.len()
    }

    pub fn kind(&self) -> PolicyKind {
        if self
            .rules
            .iter()
            .any(|r| r.kind() == PolicyKind::Stochastic)
        {
            PolicyKind::Stochastic
        } else {
            PolicyKind::Deterministic
        }
    }

    /// Probability vector over arms at the given stage. Deterministic rules
    /// return a one-hot vector; the result always sums to 1 within 1e-12.
    pub fn action_probs(&self, stage: usize, hist: &History) -> Result<Vec<f64>, CoreError> {
        self.rule(stage).action_probs(hist)
    }

    /// Probability the policy assigns to a specific action.
    pub fn action_prob(
        &self,
        stage: usize,
        hist: &History,
        action: usize,
    ) -> Result<f64, CoreError> {
        let probs = self.action_probs(stage, hist)?;
        probs.get(action).copied().ok_or(CoreError::InvalidAction {
            action,
            arity: probs.len(),
            stage,
        })
    }

    /// Deterministic decision: the argmax of the action probabilities with
    /// lowest-index tie-breaking.
    pub fn decide(&self, stage: usize, hist: &History) -> Result<usize, CoreError> {
        Ok(argmax_tie_low(&self.action_probs(stage, hist)?))
    }

    /// Draw an action; returns the arm and the probability it was drawn with.
    pub fn sample_action(
        &self,
        stage: usize,
        hist: &History,
        rng: &mut RngStream,
    ) -> Result<(usize, f64), CoreError> {
        let probs = self.action_probs(stage, hist)?;
        let r: f64 = rng.random();
        let mut cdf = 0.0;
        for (a, &p) in probs.iter().enumerate() {
            cdf += p;
            if r < cdf {
                return Ok((a, p));
            }
        }
        let last = probs.len() - 1;
        Ok((last, probs[last]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_zero_coefs_is_uniform() {
        let rule = StageRule::Softmax {
            feature_map: FeatureMap::State,
            coefs: vec![vec![0.0]; 4],
        };
        let p = PolicySpec::stationary(rule)
            .action_probs(0, &History::stateless(&[1.0]))
            .unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn deterministic_rule_is_one_hot() {
        let p = PolicySpec::stationary(StageRule::Fixed { arm: 2, arms: 3 })
            .action_probs(0, &History::stateless(&[]))
            .unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_hand_evaluation() {
        // K=2, x=1, ψ=(0, ln 3): probs ∝ (e⁰, e^{−ln3}) → (0.75, 0.25).
        let rule = StageRule::Softmax {
            feature_map: FeatureMap::State,
            coefs: vec![vec![0.0], vec![3.0f64.ln()]],
        };
        let p = PolicySpec::stationary(rule)
            .action_probs(0, &History::stateless(&[1.0]))
            .unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sign_linear_zero_picks_arm_zero() {
        let rule = StageRule::SignLinear {
            feature_map: FeatureMap::State,
            coefs: vec![0.0],
            intercept: 0.0,
        };
        let spec = PolicySpec::stationary(rule);
        assert_eq!(spec.decide(0, &History::stateless(&[5.0])).unwrap(), 0);
        let rule = StageRule::SignLinear {
            feature_map: FeatureMap::State,
            coefs: vec![1.0],
            intercept: 0.0,
        };
        let spec = PolicySpec::stationary(rule);
        assert_eq!(spec.decide(0, &History::stateless(&[5.0])).unwrap(), 1);
        assert_eq!(spec.decide(0, &History::stateless(&[-5.0])).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let rule = StageRule::Softmax {
            feature_map: FeatureMap::State,
            coefs: vec![vec![0.0, 1.0]; 2],
        };
        let err = PolicySpec::stationary(rule)
            .action_probs(0, &History::stateless(&[1.0]))
            .unwrap_err();
        assert!(matches!(err, CoreError::DimensionMismatch { .. }));
    }

    #[test]
    fn stage_rule_lookup_clamps_to_last() {
        let spec = PolicySpec::new(vec![
            StageRule::Fixed { arm: 0, arms: 2 },
            StageRule::Fixed { arm: 1, arms: 2 },
        ]);
        assert_eq!(spec.decide(0, &History::stateless(&[])).unwrap(), 0);
        assert_eq!(spec.decide(1, &History::stateless(&[])).unwrap(), 1);
        assert_eq!(spec.decide(9, &History::stateless(&[])).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn probs_sum_to_one_and_nonnegative(
            coefs in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3),
                1..6
            ),
            state in proptest::collection::vec(-10.0f64..10.0, 2)
        ) {
            let rule = StageRule::Softmax {
                feature_map: FeatureMap::InterceptState,
                coefs,
            };
            let spec = PolicySpec::stationary(rule);
            let p = spec.action_probs(0, &History::stateless(&state)).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn sampled_action_matches_reported_prob(
            seed in any::<u64>(),
            state in proptest::collection::vec(-3.0f64..3.0, 2)
        ) {
            let rule = StageRule::Softmax {
                feature_map: FeatureMap::State,
                coefs: vec![vec![0.1, -0.2], vec![0.0, 0.3], vec![-0.4, 0.0]],
            };
            let spec = PolicySpec::stationary(rule);
            let hist = History::stateless(&state);
            let mut rng = RngStream::new(seed, 0);
            let (arm, prob) = spec.sample_action(0, &hist, &mut rng).unwrap();
            let probs = spec.action_probs(0, &hist).unwrap();
            prop_assert!(arm < probs.len());
            prop_assert_eq!(prob, probs[arm]);
        }
    }
}
