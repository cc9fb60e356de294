use serde::{Deserialize, Serialize};

use super::DirectError;
use crate::core::{Dataset, FeatureMap, History, PolicySpec};
use crate::numerics::SpdMatrix;

/// Linear state-value model V(x; θ) = θᵀφ(x) fitted by the importance-
/// weighted Bellman estimating equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VLearnModel {
    pub feature_map: FeatureMap,
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
}

impl VLearnModel {
    pub fn value(&self, state: &[f64]) -> f64 {
        let phi = self.feature_map.apply(&History::stateless(state));
        phi.iter()
            .zip(self.theta.iter())
            .map(|(x, t)| x * t)
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VLearnOptions {
    /// Discount; indefinite-horizon estimation requires γ < 1.
    pub gamma: f64,
    /// Ridge penalty λ on ‖θ‖²; the weighting matrix Ŵ is the identity.
    pub lambda: f64,
}

impl Default for VLearnOptions {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VLearnFit {
    pub model: VLearnModel,
    /// ‖Λ̂(θ̂)‖₂ — zero (to rounding) in the square unpenalized case.
    pub residual_norm: f64,
}

/// Fit V(·; θ) for a target policy `d` from off-policy data.
///
/// With a linear value model the estimating function is affine,
/// Λ̂(θ) = c − Aθ with
///
/// ```text
/// A = P_N[Σ_t ρ_t φ(X_t)(φ(X_t) − γφ(X_{t+1}))ᵀ],   c = P_N[Σ_t ρ_t Y_{t+1} φ(X_t)],
/// ρ_t = d(A_t|X_t) / π_t(A_t|X_t),
/// ```
///
/// and minimizing Λ̂ᵀΛ̂ + λ‖θ‖² reduces to the normal equations
/// (AᵀA + λI)θ = Aᵀc. Only transitions with an observed successor state
/// enter the sums (the final record of each trajectory has none).
pub fn vlearn_fit(
    data: &Dataset,
    policy: &PolicySpec,
    feature_map: &FeatureMap,
    opts: &VLearnOptions,
) -> Result<VLearnFit, DirectError> {
    if !(0.0..1.0).contains(&opts.gamma) {
        return Err(DirectError::InvalidParameter(format!(
            "v-learning gamma must lie in [0, 1), got {}",
            opts.gamma
        )));
    }
    if opts.lambda < 0.0 {
        return Err(DirectError::InvalidParameter(format!(
            "v-learning lambda must be nonnegative, got {}",
            opts.lambda
        )));
    }
    let dim = feature_map.dim(data.schema.stage(0).state_dim, 0);
    let n = data.n_units() as f64;
    // A is d×d but not symmetric; accumulate rows, then form AᵀA and Aᵀc.
    let mut a = vec![vec![0.0; dim]; dim];
    let mut c = vec![0.0; dim];

    for traj in &data.trajectories {
        for t in 0..traj.len().saturating_sub(1) {
            let rec = &traj.records[t];
            if rec.behavior_prob <= 0.0 {
                return Err(DirectError::Positivity {
                    unit: traj.unit_id.clone(),
                    stage: t,
                    prob: rec.behavior_prob,
                });
            }
            let hist = History::stateless(&rec.state);
            let rho = policy.action_prob(0, &hist, rec.action)? / rec.behavior_prob;
            if rho == 0.0 {
                continue;
            }
            let y = rec.reward.ok_or_else(|| crate::core::CoreError::MissingReward {
                unit: traj.unit_id.clone(),
                stage: t,
            })?;
            let phi = feature_map.apply(&hist);
            let phi_next =
                feature_map.apply(&History::stateless(&traj.records[t + 1].state));
            let scale = rho / n;
            for i in 0..dim {
                c[i] += scale * y * phi[i];
                for j in 0..dim {
                    a[i][j] += scale * phi[i] * (phi[j] - opts.gamma * phi_next[j]);
                }
            }
        }
    }

    // (AᵀA + λI)θ = Aᵀc via the Gram of A's rows.
    let mut gram = SpdMatrix::from_gram(&a, dim);
    gram.add_diagonal(opts.lambda);
    let mut atc = vec![0.0; dim];
    for i in 0..dim {
        for j in 0..dim {
            atc[j] += a[i][j] * c[i];
        }
    }
    let theta = gram.cholesky()?.solve(&atc);

    // Residual of the estimating equation at the solution.
    let mut resid_sq = 0.0;
    for i in 0..dim {
        let ax: f64 = a[i].iter().zip(theta.iter()).map(|(v, t)| v * t).sum();
        resid_sq += (c[i] - ax).powi(2);
    }

    Ok(VLearnFit {
        model: VLearnModel {
            feature_map: feature_map.clone(),
            theta,
            gamma: opts.gamma,
            lambda: opts.lambda,
        },
        residual_norm: resid_sq.sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct VLearnSearchResult {
    pub best_index: usize,
    /// Fitted value of each candidate, averaged over the empirical
    /// initial-state distribution.
    pub scores: Vec<f64>,
}

/// Score each candidate policy by its fitted value averaged over the
/// observed initial states, and pick the best; exact ties keep the earliest
/// candidate in enumeration order.
pub fn vlearn_policy_search(
    data: &Dataset,
    candidates: &[PolicySpec],
    feature_map: &FeatureMap,
    opts: &VLearnOptions,
) -> Result<VLearnSearchResult, DirectError> {
    if candidates.is_empty() {
        return Err(DirectError::InvalidParameter(
            "policy search needs at least one candidate".into(),
        ));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for policy in candidates {
        let fit = vlearn_fit(data, policy, feature_map, opts)?;
        let total: f64 = data
            .trajectories
            .iter()
            .map(|t| fit.model.value(&t.records[0].state))
            .sum();
        scores.push(total / data.n_units() as f64);
    }
    let best_index = crate::core::argmax_tie_low(&scores);
    Ok(VLearnSearchResult { best_index, scores })
}
