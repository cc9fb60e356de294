use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::core::argmax_tie_low;
use crate::numerics::{sample_mvn_from_precision, RngStream, SpdMatrix};

/// Sufficient statistics of a linear bandit: `B = λI + Σ φφᵀ` over the
/// chosen arms' features and `b = Σ φ·y`. `B` stays positive definite by
/// construction, so the ridge point estimate is always `μ̂ = B⁻¹b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinBanditState {
    b_mat: SpdMatrix,
    b_vec: Vec<f64>,
    lambda: f64,
    t: u64,
}

impl LinBanditState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self, BanditError> {
        if !(lambda > 0.0) {
            return Err(BanditError::InvalidParameter(format!(
                "prior scale lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            b_mat: SpdMatrix::scaled_identity(dim, lambda),
            b_vec: vec![0.0; dim],
            lambda,
            t: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b_vec.len()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b_matrix(&self) -> &SpdMatrix {
        &self.b_mat
    }

    pub fn mean_estimate(&self) -> Result<Vec<f64>, BanditError> {
        Ok(self.b_mat.cholesky()?.solve(&self.b_vec))
    }

    fn check_dim(&self, features: &[f64]) -> Result<(), BanditError> {
        if features.len() != self.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim(),
                got: features.len(),
            });
        }
        Ok(())
    }
}

/// Pick the arm with the highest upper confidence bound
/// `Û(a) = φ_aᵀμ̂ + α·√(φ_aᵀB⁻¹φ_a)`; ties go to the lowest index. Returns
/// the chosen arm together with the per-arm UCB values. α = 0 is pure
/// exploitation.
pub fn linucb_select(
    state: &LinBanditState,
    arm_features: &[Vec<f64>],
    alpha: f64,
) -> Result<(usize, Vec<f64>), BanditError> {
    if arm_features.is_empty() {
        return Err(BanditError::NoArms);
    }
    if !(alpha >= 0.0) {
        return Err(BanditError::InvalidParameter(format!(
            "exploration weight alpha must be nonnegative, got {alpha}"
        )));
    }
    let chol = state.b_mat.cholesky()?;
    let mean = chol.solve(&state.b_vec);
    let mut ucbs = Vec::with_capacity(arm_features.len());
    for phi in arm_features {
        state.check_dim(phi)?;
        let exploit: f64 = phi.iter().zip(mean.iter()).map(|(x, m)| x * m).sum();
        let binv_phi = chol.solve(phi);
        let width: f64 = phi.iter().zip(binv_phi.iter()).map(|(x, v)| x * v).sum();
        ucbs.push(exploit + alpha * width.max(0.0).sqrt());
    }
    Ok((argmax_tie_low(&ucbs), ucbs))
}

/// Rank-one statistics update after observing `reward` for the arm whose
/// features were `chosen`: `B += φφᵀ`, `b += φ·y`, `t += 1`.
pub fn lin_bandit_update(
    state: &mut LinBanditState,
    chosen_features: &[f64],
    reward: f64,
) -> Result<(), BanditError> {
    state.check_dim(chosen_features)?;
    state.b_mat.add_outer(chosen_features, 1.0);
    for (b, x) in state.b_vec.iter_mut().zip(chosen_features.iter()) {
        *b += x * reward;
    }
    state.t += 1;
    Ok(())
}

/// Thompson step: draw `μ̃ ~ N(μ̂, ν²B⁻¹)` and take the arm maximizing
/// `φ_aᵀμ̃`. ν = 0 degenerates to the posterior mean, which coincides with
/// α = 0 LinUCB selection.
pub fn lints_select(
    state: &LinBanditState,
    arm_features: &[Vec<f64>],
    nu: f64,
    rng: &mut RngStream,
) -> Result<usize, BanditError> {
    if arm_features.is_empty() {
        return Err(BanditError::NoArms);
    }
    if !(nu >= 0.0) {
        return Err(BanditError::InvalidParameter(format!(
            "posterior scale nu must be nonnegative, got {nu}"
        )));
    }
    let chol = state.b_mat.cholesky()?;
    let mean = chol.solve(&state.b_vec);
    let draw = sample_mvn_from_precision(&mean, &chol, nu, rng)?;
    let mut scores = Vec::with_capacity(arm_features.len());
    for phi in arm_features {
        state.check_dim(phi)?;
        scores.push(phi.iter().zip(draw.iter()).map(|(x, m)| x * m).sum());
    }
    Ok(argmax_tie_low(&scores))
}
