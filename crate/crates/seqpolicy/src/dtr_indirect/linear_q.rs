use serde::{Deserialize, Serialize};

use super::QLearnError;
use crate::core::{
    CoreError, Dataset, FeatureMap, History, HorizonKind, PolicySpec, StageRule,
};
use crate::numerics::ridge_fit;

/// Stage-t Q-function Q_t(h, a; θ) = φ(h, a)ᵀθ, where φ(h, a) places the
/// history features φ(h) into the block belonging to action a. The blocked
/// layout keeps one coefficient vector per stage while saturating distinct
/// per-action effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageQ {
    pub feature_map: FeatureMap,
    pub n_actions: usize,
    pub theta: Vec<f64>,
}

impl StageQ {
    fn block_dim(&self) -> usize {
        self.theta.len() / self.n_actions
    }

    pub fn action_block(&self, action: usize) -> &[f64] {
        let m = self.block_dim();
        &self.theta[action * m..(action + 1) * m]
    }

    pub fn q_value(&self, hist: &History, action: usize) -> f64 {
        let phi = self.feature_map.apply(hist);
        phi.iter()
            .zip(self.action_block(action).iter())
            .map(|(x, t)| x * t)
            .sum()
    }

    pub fn q_values(&self, hist: &History) -> Vec<f64> {
        (0..self.n_actions).map(|a| self.q_value(hist, a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQModel {
    pub stages: Vec<StageQ>,
    pub gamma: f64,
}

impl LinearQModel {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QFitOptions {
    /// Ridge penalty on every stage regression. The small default keeps the
    /// normal equations positive definite without visibly biasing fits.
    pub ridge_lambda: f64,
    /// Discount between stages; finite-horizon regimes conventionally use 1.
    pub gamma: f64,
}

impl Default for QFitOptions {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            gamma: 1.0,
        }
    }
}

/// Fit per-stage linear Q-functions by backward induction: the last stage
/// regresses its observed reward on the blocked features; every earlier
/// stage regresses the pseudo-outcome `y_t + γ·max_a Q̂_{t+1}(h_{t+1}, a)`.
/// Missing rewards must be imputed beforehand.
pub fn fit_q_backward(
    data: &Dataset,
    feature_maps: &[FeatureMap],
    opts: &QFitOptions,
) -> Result<LinearQModel, QLearnError> {
    let t_max = match data.schema.horizon {
        HorizonKind::Fixed(t) => t,
        HorizonKind::Indefinite => return Err(QLearnError::NotFixedHorizon),
    };
    if feature_maps.len() != t_max {
        return Err(QLearnError::FeatureMapCount {
            expected: t_max,
            got: feature_maps.len(),
        });
    }

    let mut stages: Vec<Option<StageQ>> = vec![None; t_max];
    for t in (0..t_max).rev() {
        let n_actions = data.schema.stage(t).action_arity;
        let mut rows = Vec::with_capacity(data.n_units());
        let mut targets = Vec::with_capacity(data.n_units());
        for traj in &data.trajectories {
            let hist = traj.history(t);
            let phi = feature_maps[t].apply(&hist);
            rows.push(blocked_features(&phi, traj.records[t].action, n_actions));
            let reward = traj.records[t]
                .reward
                .ok_or_else(|| CoreError::MissingReward {
                    unit: traj.unit_id.clone(),
                    stage: t,
                })?;
            let future = if t + 1 < t_max {
                let next_stage = stages[t + 1].as_ref().expect("fitted in prior iteration");
                let next_hist = traj.history(t + 1);
                let qs = next_stage.q_values(&next_hist);
                qs.into_iter().fold(f64::NEG_INFINITY, f64::max)
            } else {
                0.0
            };
            targets.push(reward + opts.gamma * future);
        }
        let theta = ridge_fit(&rows, &targets, opts.ridge_lambda)?;
        stages[t] = Some(StageQ {
            feature_map: feature_maps[t].clone(),
            n_actions,
            theta,
        });
    }

    Ok(LinearQModel {
        stages: stages.into_iter().map(|s| s.unwrap()).collect(),
        gamma: opts.gamma,
    })
}

/// Deterministic regime: at each stage take the argmax of the fitted
/// Q-values, lowest arm index on exact ties.
pub fn greedy_policy_from_q(model: &LinearQModel) -> PolicySpec {
    let rules = model
        .stages
        .iter()
        .map(|stage| {
            let m = stage.theta.len() / stage.n_actions;
            let scores = (0..stage.n_actions)
                .map(|a| stage.theta[a * m..(a + 1) * m].to_vec())
                .collect();
            StageRule::ArgmaxLinear {
                feature_map: stage.feature_map.clone(),
                scores,
            }
        })
        .collect();
    PolicySpec::new(rules)
}

fn blocked_features(phi: &[f64], action: usize, n_actions: usize) -> Vec<f64> {
    let m = phi.len();
    let mut row = vec![0.0; m * n_actions];
    row[action * m..(action + 1) * m].copy_from_slice(phi);
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{DatasetSchema, StageRecord, StageSchema, Trajectory};

    fn single_stage_dataset() -> Dataset {
        let schema = DatasetSchema::fixed(vec![StageSchema {
            state_dim: 1,
            action_arity: 2,
        }]);
        let rows = [
            (0.5, 0, 1.0),
            (1.5, 0, 2.0),
            (0.5, 1, 3.0),
            (1.5, 1, 5.0),
            (1.0, 0, 1.4),
            (1.0, 1, 4.1),
        ];
        let trajectories = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, a, y))| {
                Trajectory::new(
                    format!("u{i}"),
                    vec![StageRecord::new(vec![x], a, Some(y), 0.5)],
                )
            })
            .collect();
        Dataset::new(schema, trajectories).unwrap()
    }

    #[test]
    fn single_stage_equals_plain_ridge_fit() {
        let data = single_stage_dataset();
        let maps = vec![FeatureMap::InterceptState];
        let model = fit_q_backward(&data, &maps, &QFitOptions::default()).unwrap();

        // The same regression assembled by hand.
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for traj in &data.trajectories {
            let rec = &traj.records[0];
            rows.push(blocked_features(&[1.0, rec.state[0]], rec.action, 2));
            ys.push(rec.reward.unwrap());
        }
        let direct = ridge_fit(&rows, &ys, 1e-6).unwrap();
        assert_eq!(model.stages[0].theta, direct);
    }

    #[test]
    fn greedy_policy_takes_argmax_and_breaks_ties_low() {
        let stage = StageQ {
            feature_map: FeatureMap::ConstantOne,
            n_actions: 2,
            theta: vec![1.0, 3.0],
        };
        let model = LinearQModel {
            stages: vec![stage],
            gamma: 1.0,
        };
        let policy = greedy_policy_from_q(&model);
        let hist = History::stateless(&[]);
        assert_eq!(policy.decide(0, &hist).unwrap(), 1);

        let tied = LinearQModel {
            stages: vec![StageQ {
                feature_map: FeatureMap::ConstantOne,
                n_actions: 2,
                theta: vec![2.0, 2.0],
            }],
            gamma: 1.0,
        };
        assert_eq!(
            greedy_policy_from_q(&tied).decide(0, &hist).unwrap(),
            0,
            "exact tie goes to arm 0"
        );
    }

    #[test]
    fn greedy_policy_invariant_to_constant_q_shift() {
        let base = StageQ {
            feature_map: FeatureMap::InterceptState,
            n_actions: 2,
            theta: vec![0.3, -1.0, 0.1, 0.7],
        };
        let mut shifted = base.clone();
        // Adding a constant to every Q-value = shifting each intercept slot.
        shifted.theta[0] += 100.0;
        shifted.theta[2] += 100.0;
        let p1 = greedy_policy_from_q(&LinearQModel {
            stages: vec![base],
            gamma: 1.0,
        });
        let p2 = greedy_policy_from_q(&LinearQModel {
            stages: vec![shifted],
            gamma: 1.0,
        });
        for x in [-2.0, -0.5, 0.0, 0.4, 3.0] {
            let hist = History::stateless(std::slice::from_ref(&x));
            assert_eq!(p1.decide(0, &hist).unwrap(), p2.decide(0, &hist).unwrap());
        }
    }

    #[test]
    fn missing_reward_rejected_with_imputation_advice() {
        let schema = DatasetSchema::fixed(vec![StageSchema {
            state_dim: 1,
            action_arity: 2,
        }]);
        let traj = Trajectory::new("u0", vec![StageRecord::new(vec![0.0], 0, None, 0.5)]);
        let data = Dataset::new(schema, vec![traj]).unwrap();
        let err = fit_q_backward(
            &data,
            &[FeatureMap::InterceptState],
            &QFitOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("impute"));
    }

    #[test]
    fn trajectory_order_does_not_change_the_fit() {
        let data = single_stage_dataset();
        let mut reversed = data.clone();
        reversed.trajectories.reverse();
        let maps = vec![FeatureMap::InterceptState];
        let a = fit_q_backward(&data, &maps, &QFitOptions::default()).unwrap();
        let b = fit_q_backward(&reversed, &maps, &QFitOptions::default()).unwrap();
        for (x, y) in a.stages[0].theta.iter().zip(b.stages[0].theta.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_design_with_zero_lambda_advises_ridge() {
        let data = single_stage_dataset();
        // HistoryOneHot over 4 state levels: levels 2 and 3 never occur, so
        // the saturated design is rank deficient.
        let maps = vec![FeatureMap::HistoryOneHot {
            state_arity: 4,
            past_action_arities: vec![],
        }];
        let opts = QFitOptions {
            ridge_lambda: 0.0,
            gamma: 1.0,
        };
        let err = fit_q_backward(&data, &maps, &opts).unwrap_err();
        assert!(err.to_string().contains("lambda > 0"));
    }
}
