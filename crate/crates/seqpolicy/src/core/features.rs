use serde::{Deserialize, Serialize};

use super::data::StageRecord;
use super::CoreError;

/// View of everything known just before the stage-`t` action: the fully
/// observed past records and the current state X_t.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub stage: usize,
    pub past: &'a [StageRecord],
    pub state: &'a [f64],
}

impl<'a> History<'a> {
    /// History with no past, for single-stage or stationary settings.
    pub fn stateless(state: &'a [f64]) -> Self {
        Self {
            stage: 0,
            past: &[],
            state,
        }
    }
}

/// Declared mapping from a history to a feature vector. Rewards never enter
/// features directly; simulators that need them carry them forward inside
/// the state instead, which keeps every map total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    /// The constant 1 — scalar models.
    ConstantOne,
    /// Current state as-is.
    State,
    /// Intercept followed by the current state.
    InterceptState,
    /// Intercept, current state, then each past action as a real number.
    InterceptStatePastActions,
    /// One-hot over a finite history key. State entries are rounded and
    /// clamped into {0, …, state_arity−1}; past actions (one per declared
    /// arity, matched from the most recent backwards) join the key in mixed
    /// radix. Saturates finite history spaces for plug-in dynamic programs.
    HistoryOneHot {
        state_arity: usize,
        past_action_arities: Vec<usize>,
    },
}

impl FeatureMap {
    pub fn apply(&self, hist: &History) -> Vec<f64> {
        match self {
            FeatureMap::ConstantOne => vec![1.0],
            FeatureMap::State => hist.state.to_vec(),
            FeatureMap::InterceptState => {
                let mut f = Vec::with_capacity(1 + hist.state.len());
                f.push(1.0);
                f.extend_from_slice(hist.state);
                f
            }
            FeatureMap::InterceptStatePastActions => {
                let mut f = Vec::with_capacity(1 + hist.state.len() + hist.past.len());
                f.push(1.0);
                f.extend_from_slice(hist.state);
                f.extend(hist.past.iter().map(|r| r.action as f64));
                f
            }
            FeatureMap::HistoryOneHot {
                state_arity,
                past_action_arities,
            } => {
                let n = self.one_hot_dim(hist.state.len());
                let mut f = vec![0.0; n];
                f[self.history_key(hist, *state_arity, past_action_arities)] = 1.0;
                f
            }
        }
    }

    /// Feature dimension for a given state dimension.
    pub fn dim(&self, state_dim: usize, n_past: usize) -> usize {
        match self {
            FeatureMap::ConstantOne => 1,
            FeatureMap::State => state_dim,
            FeatureMap::InterceptState => 1 + state_dim,
            FeatureMap::InterceptStatePastActions => 1 + state_dim + n_past,
            FeatureMap::HistoryOneHot { .. } => self.one_hot_dim(state_dim),
        }
    }

    fn one_hot_dim(&self, state_dim: usize) -> usize {
        match self {
            FeatureMap::HistoryOneHot {
                state_arity,
                past_action_arities,
            } => {
                let mut n = state_arity.pow(state_dim as u32).max(1);
                for a in past_action_arities {
                    n *= a.max(&1);
                }
                n
            }
            _ => unreachable!(),
        }
    }

    fn history_key(&self, hist: &History, state_arity: usize, arities: &[usize]) -> usize {
        let mut key = 0usize;
        for &x in hist.state {
            let level = (x.round().max(0.0) as usize).min(state_arity.saturating_sub(1));
            key = key * state_arity + level;
        }
        // Most recent actions first so short histories still key consistently.
        for (i, &arity) in arities.iter().enumerate() {
            let a = hist
                .past
                .len()
                .checked_sub(i + 1)
                .map(|idx| hist.past[idx].action.min(arity.saturating_sub(1)))
                .unwrap_or(0);
            key = key * arity + a;
        }
        key
    }

    /// Validate that a coefficient vector conforms to this map applied to
    /// the given feature vector length.
    pub fn check_coef_len(&self, coefs: &[f64], features: &[f64]) -> Result<(), CoreError> {
        if coefs.len() != features.len() {
            return Err(CoreError::DimensionMismatch {
                what: "coefficient vector vs features".into(),
                expected: features.len(),
                got: coefs.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_state_layout() {
        let h = History::stateless(&[2.0, 3.0]);
        assert_eq!(FeatureMap::InterceptState.apply(&h), vec![1.0, 2.0, 3.0]);
        assert_eq!(FeatureMap::State.apply(&h), vec![2.0, 3.0]);
        assert_eq!(FeatureMap::ConstantOne.apply(&h), vec![1.0]);
    }

    #[test]
    fn past_actions_appended() {
        let past = vec![
            StageRecord::new(vec![0.0], 1, Some(0.0), 0.5),
            StageRecord::new(vec![0.0], 0, Some(0.0), 0.5),
        ];
        let h = History {
            stage: 2,
            past: &past,
            state: &[5.0],
        };
        assert_eq!(
            FeatureMap::InterceptStatePastActions.apply(&h),
            vec![1.0, 5.0, 1.0, 0.0]
        );
    }

    #[test]
    fn one_hot_saturates_binary_state_and_action() {
        let map = FeatureMap::HistoryOneHot {
            state_arity: 2,
            past_action_arities: vec![2],
        };
        let past = vec![StageRecord::new(vec![0.0], 1, Some(0.0), 0.5)];
        let h = History {
            stage: 1,
            past: &past,
            state: &[1.0],
        };
        let f = map.apply(&h);
        assert_eq!(f.len(), 4);
        // key = state·2 + last action = 1·2 + 1 = 3
        assert_eq!(f, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_with_no_past_defaults_action_slot() {
        let map = FeatureMap::HistoryOneHot {
            state_arity: 2,
            past_action_arities: vec![2],
        };
        let h = History::stateless(&[0.0]);
        assert_eq!(map.apply(&h), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dims_agree_with_apply() {
        let h = History::stateless(&[1.0, 0.0, 1.0]);
        for map in [
            FeatureMap::ConstantOne,
            FeatureMap::State,
            FeatureMap::InterceptState,
            FeatureMap::HistoryOneHot {
                state_arity: 2,
                past_action_arities: vec![],
            },
        ] {
            assert_eq!(map.apply(&h).len(), map.dim(3, 0));
        }
    }
}
