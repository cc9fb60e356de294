use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::core::{Dataset, FeatureMap, History, HorizonKind};
use crate::numerics::{ridge_fit, SpdMatrix};

/// Fitted actor-critic bandit: logistic policy π(1|x; θ) over policy
/// features g(x) and a ridge critic over action-blocked reward features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticState {
    pub theta: Vec<f64>,
    pub critic_coefs: Vec<f64>,
    pub policy_features: FeatureMap,
    pub reward_features: FeatureMap,
    pub pi_min: f64,
    pub alpha_cc: f64,
    pub lagrange: f64,
}

impl ActorCriticState {
    pub fn action_one_prob(&self, state: &[f64]) -> f64 {
        let g = self.policy_features.apply(&History::stateless(state));
        let score: f64 = g.iter().zip(self.theta.iter()).map(|(x, t)| x * t).sum();
        logistic(score)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ActorCriticOptions {
    /// Stochasticity band: the report checks π(1|x) against
    /// [pi_min, 1 − pi_min].
    pub pi_min: f64,
    /// Chance-constraint level α: the fit *reports* the fraction of
    /// training contexts outside the band and whether it stays below α; it
    /// does not enforce the constraint (the Lagrange weight is supplied).
    pub alpha_cc: f64,
    /// Lagrange multiplier λ on θᵀE[g gᵀ]θ.
    pub lagrange: f64,
    pub critic_ridge: f64,
    pub max_iters: usize,
    /// Box bound on each θ coordinate; the unpenalized objective with a
    /// dominant arm is unbounded, so hitting this flags the fit.
    pub theta_max: f64,
    pub grad_tol: f64,
}

impl Default for ActorCriticOptions {
    fn default() -> Self {
        Self {
            pi_min: 0.1,
            alpha_cc: 0.1,
            lagrange: 0.1,
            critic_ridge: 1.0,
            max_iters: 5_000,
            theta_max: 20.0,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActorCriticFit {
    pub state: ActorCriticState,
    pub objective: f64,
    /// Fraction of training contexts with π(1|x; θ̂) outside the band.
    pub constraint_violation_frac: f64,
    /// violation fraction ≤ α.
    pub satisfies_chance_constraint: bool,
    /// False when the optimizer ran into the θ box — the unbounded case.
    pub bounded: bool,
}

/// Offline actor-critic fit on single-stage binary-action data.
///
/// Critic: L2-penalized least squares of Y on the action-blocked reward
/// features. Actor: maximize the regularized average reward
///
/// ```text
/// Ĵ_λ(θ) = P_N[ Σ_a Ê(Y|x,a)·π(a|x;θ) ] − λ·θᵀ P_N[g(x)g(x)ᵀ] θ
/// ```
///
/// by projected gradient ascent with backtracking line search.
pub fn actor_critic_fit(
    data: &Dataset,
    policy_features: &FeatureMap,
    reward_features: &FeatureMap,
    opts: &ActorCriticOptions,
) -> Result<ActorCriticFit, BanditError> {
    match data.schema.horizon {
        HorizonKind::Fixed(1) => {}
        _ => {
            return Err(BanditError::Schema(
                "actor-critic expects single-stage data".into(),
            ))
        }
    }
    if data.schema.stage(0).action_arity != 2 {
        return Err(BanditError::Schema(format!(
            "actor-critic handles binary actions, dataset has arity {}",
            data.schema.stage(0).action_arity
        )));
    }
    if !(opts.pi_min > 0.0 && opts.pi_min < 0.5) {
        return Err(BanditError::InvalidParameter(format!(
            "pi_min must lie in (0, 0.5), got {}",
            opts.pi_min
        )));
    }
    if !(opts.alpha_cc > 0.0 && opts.alpha_cc < 1.0) {
        return Err(BanditError::InvalidParameter(format!(
            "alpha_cc must lie in (0, 1), got {}",
            opts.alpha_cc
        )));
    }
    if opts.lagrange < 0.0 {
        return Err(BanditError::InvalidParameter(format!(
            "lagrange weight must be nonnegative, got {}",
            opts.lagrange
        )));
    }

    // Critic: Y ~ blocked reward features.
    let n = data.n_units();
    let mut critic_rows = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut policy_rows = Vec::with_capacity(n);
    for traj in &data.trajectories {
        let rec = &traj.records[0];
        let hist = traj.history(0);
        let f = reward_features.apply(&hist);
        let mut row = vec![0.0; 2 * f.len()];
        row[rec.action * f.len()..(rec.action + 1) * f.len()].copy_from_slice(&f);
        critic_rows.push(row);
        outcomes.push(rec.reward.ok_or_else(|| crate::core::CoreError::MissingReward {
            unit: traj.unit_id.clone(),
            stage: 0,
        })?);
        policy_rows.push(policy_features.apply(&hist));
    }
    let critic = ridge_fit(&critic_rows, &outcomes, opts.critic_ridge)?;
    let m = critic.len() / 2;

    // Per-unit critic-estimated means for both arms.
    let mut mu0 = Vec::with_capacity(n);
    let mut mu1 = Vec::with_capacity(n);
    for traj in &data.trajectories {
        let f = reward_features.apply(&traj.history(0));
        mu0.push(f.iter().zip(critic[..m].iter()).map(|(x, c)| x * c).sum::<f64>());
        mu1.push(f.iter().zip(critic[m..].iter()).map(|(x, c)| x * c).sum::<f64>());
    }

    let p = policy_rows[0].len();
    let penalty = {
        let mut g = SpdMatrix::from_gram(&policy_rows, p);
        // Average rather than sum, matching the empirical objective.
        let mut avg = SpdMatrix::zeros(p);
        for i in 0..p {
            for j in 0..p {
                avg.set(i, j, g.get(i, j) / n as f64);
            }
        }
        g = avg;
        g
    };

    let objective = |theta: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let s: f64 = policy_rows[i]
                .iter()
                .zip(theta.iter())
                .map(|(x, t)| x * t)
                .sum();
            let p1 = logistic(s);
            total += mu0[i] * (1.0 - p1) + mu1[i] * p1;
        }
        let quad: f64 = theta
            .iter()
            .zip(penalty.matvec(theta).iter())
            .map(|(t, v)| t * v)
            .sum();
        total / n as f64 - opts.lagrange * quad
    };

    let mut theta = vec![0.0; p];
    let mut obj = objective(&theta);
    let mut hit_bound = false;
    for _ in 0..opts.max_iters {
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let s: f64 = policy_rows[i]
                .iter()
                .zip(theta.iter())
                .map(|(x, t)| x * t)
                .sum();
            let p1 = logistic(s);
            let scale = (mu1[i] - mu0[i]) * p1 * (1.0 - p1) / n as f64;
            for (g, x) in grad.iter_mut().zip(policy_rows[i].iter()) {
                *g += scale * x;
            }
        }
        let pen_grad = penalty.matvec(&theta);
        for (g, v) in grad.iter_mut().zip(pen_grad.iter()) {
            *g -= 2.0 * opts.lagrange * v;
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < opts.grad_tol {
            break;
        }
        // Line search along the normalized ascent direction, stepping down
        // a geometric ladder from the full box width; the first improving
        // candidate wins. Large first steps let the iterate reach the box
        // in the unbounded case where the logistic gradient vanishes.
        let mut step = 2.0 * opts.theta_max;
        let mut moved = false;
        for _ in 0..70 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(grad.iter())
                .map(|(t, g)| (t + step * g / gnorm).clamp(-opts.theta_max, opts.theta_max))
                .collect();
            let cand_obj = objective(&candidate);
            if cand_obj > obj + 1e-16 {
                if candidate
                    .iter()
                    .any(|t| t.abs() >= opts.theta_max - 1e-9)
                {
                    hit_bound = true;
                }
                theta = candidate;
                obj = cand_obj;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let mut violations = 0usize;
    for row in &policy_rows {
        let s: f64 = row.iter().zip(theta.iter()).map(|(x, t)| x * t).sum();
        let p1 = logistic(s);
        if p1 < opts.pi_min || p1 > 1.0 - opts.pi_min {
            violations += 1;
        }
    }
    let violation_frac = violations as f64 / n as f64;

    Ok(ActorCriticFit {
        state: ActorCriticState {
            theta,
            critic_coefs: critic,
            policy_features: policy_features.clone(),
            reward_features: reward_features.clone(),
            pi_min: opts.pi_min,
            alpha_cc: opts.alpha_cc,
            lagrange: opts.lagrange,
        },
        objective: obj,
        constraint_violation_frac: violation_frac,
        satisfies_chance_constraint: violation_frac <= opts.alpha_cc,
        bounded: !hit_bound,
    })
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{DatasetSchema, StageRecord, StageSchema, Trajectory};

    fn single_stage(rows: &[(f64, usize, f64)]) -> Dataset {
        let schema = DatasetSchema::fixed(vec![StageSchema {
            state_dim: 1,
            action_arity: 2,
        }]);
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
    fn symmetric_arms_keep_theta_at_zero() {
        // Identical outcomes for both arms at every context: the penalty
        // centers the fit at θ = 0, i.e. π = 0.5 everywhere.
        let rows = [
            (1.0, 0, 1.0),
            (1.0, 1, 1.0),
            (-1.0, 0, 1.0),
            (-1.0, 1, 1.0),
        ];
        let data = single_stage(&rows);
        let fit = actor_critic_fit(
            &data,
            &FeatureMap::ConstantOne,
            &FeatureMap::ConstantOne,
            &ActorCriticOptions::default(),
        )
        .unwrap();
        assert!(fit.state.theta[0].abs() < 1e-9, "theta {}", fit.state.theta[0]);
        assert!((fit.state.action_one_prob(&[1.0]) - 0.5).abs() < 1e-9);
        assert!(fit.bounded);
    }

    #[test]
    fn one_dim_fit_matches_exhaustive_grid_search() {
        // Arm 1 beats arm 0 by exactly 1 everywhere, λ = 0.1, g(x) = 1.
        let mut rows = Vec::new();
        for i in 0..40 {
            let a = i % 2;
            rows.push((0.0, a, if a == 1 { 1.5 } else { 0.5 }));
        }
        let data = single_stage(&rows);
        let opts = ActorCriticOptions {
            lagrange: 0.1,
            critic_ridge: 1e-8,
            ..ActorCriticOptions::default()
        };
        let fit = actor_critic_fit(
            &data,
            &FeatureMap::ConstantOne,
            &FeatureMap::ConstantOne,
            &opts,
        )
        .unwrap();

        // Brute-force grid oracle over [−20, 20] at step 1e-3 using the
        // same critic means.
        let mu1 = 1.5;
        let mu0 = 0.5;
        let grid_obj = |theta: f64| {
            let p1 = logistic(theta);
            mu0 * (1.0 - p1) + mu1 * p1 - 0.1 * theta * theta
        };
        let mut best = f64::NEG_INFINITY;
        let mut best_theta = 0.0;
        let mut t = -20.0;
        while t <= 20.0 {
            let v = grid_obj(t);
            if v > best {
                best = v;
                best_theta = t;
            }
            t += 1e-3;
        }
        // Critic ridge is tiny so the fitted means match μ to ~1e-8.
        assert!(
            (fit.state.theta[0] - best_theta).abs() < 2e-3,
            "fit {} vs grid {}",
            fit.state.theta[0],
            best_theta
        );
    }

    #[test]
    fn unpenalized_dominant_arm_hits_the_box_and_flags_unbounded() {
        let mut rows = Vec::new();
        for i in 0..40 {
            let a = i % 2;
            rows.push((0.0, a, if a == 1 { 2.0 } else { 0.0 }));
        }
        let data = single_stage(&rows);
        let opts = ActorCriticOptions {
            lagrange: 0.0,
            max_iters: 20_000,
            ..ActorCriticOptions::default()
        };
        let fit = actor_critic_fit(
            &data,
            &FeatureMap::ConstantOne,
            &FeatureMap::ConstantOne,
            &opts,
        )
        .unwrap();
        assert!(!fit.bounded, "theta = {:?}", fit.state.theta);
        assert!((fit.state.theta[0] - 20.0).abs() < 1e-6);
        // π(1|x) ≈ 1 violates any stochasticity band.
        assert!(fit.constraint_violation_frac == 1.0);
        assert!(!fit.satisfies_chance_constraint);
    }

    #[test]
    fn non_binary_actions_rejected() {
        let schema = DatasetSchema::fixed(vec![StageSchema {
            state_dim: 1,
            action_arity: 3,
        }]);
        let data = Dataset::new(
            schema,
            vec![Trajectory::new(
                "u0",
                vec![StageRecord::new(vec![0.0], 2, Some(1.0), 0.4)],
            )],
        )
        .unwrap();
        assert!(matches!(
            actor_critic_fit(
                &data,
                &FeatureMap::ConstantOne,
                &FeatureMap::ConstantOne,
                &ActorCriticOptions::default()
            ),
            Err(BanditError::Schema(_))
        ));
    }
}
