use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::core::argmax_tie_low;
use crate::numerics::{sample_inverse_gamma, RngStream, SpdMatrix};

/// Normal-Inverse-Gamma conjugate state for Bayesian linear regression with
/// unknown coefficient vector and noise variance:
/// β | σ² ~ N(μ, σ²Σ) and σ² ~ IG(a, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NIGPosterior {
    pub mu: Vec<f64>,
    pub sigma: SpdMatrix,
    pub a: f64,
    pub b: f64,
}

impl NIGPosterior {
    pub fn new(mu: Vec<f64>, sigma: SpdMatrix, a: f64, b: f64) -> Result<Self, BanditError> {
        if mu.len() != sigma.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: sigma.dim(),
                got: mu.len(),
            });
        }
        if !(a > 0.0) || !(b > 0.0) {
            return Err(BanditError::InvalidParameter(format!(
                "NIG shape parameters must be positive, got a={a}, b={b}"
            )));
        }
        // Surface a non-PD scale matrix now rather than at first use.
        sigma.cholesky()?;
        Ok(Self { mu, sigma, a, b })
    }

    /// Weakly informative default: zero mean, unit scale, IG(1, 1).
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            sigma: SpdMatrix::identity(dim),
            a: 1.0,
            b: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Conjugate batch update with design rows `X` and rewards `y`:
///
/// ```text
/// Σ* = (Σ⁻¹ + XᵀX)⁻¹
/// μ* = Σ*(Σ⁻¹μ + Xᵀy)
/// a* = a + n/2
/// b* = b + ½(μᵀΣ⁻¹μ + yᵀy − μ*ᵀΣ*⁻¹μ*)
/// ```
///
/// An empty batch returns the prior unchanged. Conjugacy makes one n-row
/// update equal n single-row updates.
pub fn nig_update(
    prior: &NIGPosterior,
    rows: &[Vec<f64>],
    y: &[f64],
) -> Result<NIGPosterior, BanditError> {
    if rows.len() != y.len() {
        return Err(BanditError::DimensionMismatch {
            expected: rows.len(),
            got: y.len(),
        });
    }
    if rows.is_empty() {
        return Ok(prior.clone());
    }
    let d = prior.dim();
    for r in rows {
        if r.len() != d {
            return Err(BanditError::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
    }

    let prior_precision = prior.sigma.inverse()?;
    let mut posterior_precision = prior_precision.clone();
    for row in rows {
        posterior_precision.add_outer(row, 1.0);
    }

    // rhs = Σ⁻¹μ + Xᵀy; note Σ*⁻¹μ* = rhs, so μ*ᵀΣ*⁻¹μ* = μ*ᵀ·rhs.
    let mut rhs = prior_precision.matvec(&prior.mu);
    for (row, &yi) in rows.iter().zip(y.iter()) {
        for (r, &x) in rhs.iter_mut().zip(row.iter()) {
            *r += x * yi;
        }
    }
    let chol = posterior_precision.cholesky()?;
    let mu_star = chol.solve(&rhs);
    let sigma_star = posterior_precision.inverse()?;

    let prior_quad: f64 = prior
        .mu
        .iter()
        .zip(prior_precision.matvec(&prior.mu).iter())
        .map(|(m, v)| m * v)
        .sum();
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let post_quad: f64 = mu_star.iter().zip(rhs.iter()).map(|(m, v)| m * v).sum();

    let a_star = prior.a + rows.len() as f64 / 2.0;
    let b_star = prior.b + 0.5 * (prior_quad + yty - post_quad);
    if !(b_star > 0.0) {
        return Err(BanditError::NumericalConsistency(b_star));
    }

    Ok(NIGPosterior {
        mu: mu_star,
        sigma: sigma_star,
        a: a_star,
        b: b_star,
    })
}

/// How the Thompson step treats the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NigSelectMode {
    /// Draw σ̃² ~ IG(a, b), then β̃ ~ N(μ, σ̃²Σ) — the sampling policy.
    PosteriorDraw,
    /// Exploitation limit: act on the exact posterior mean.
    ExactMean,
}

/// Choose the arm maximizing `f(x, a, z̄_a)ᵀβ̃` where β̃ is a posterior draw
/// (or the posterior mean in [`NigSelectMode::ExactMean`]).
pub fn nig_ts_select(
    posterior: &NIGPosterior,
    arm_features: &[Vec<f64>],
    mode: NigSelectMode,
    rng: &mut RngStream,
) -> Result<usize, BanditError> {
    if arm_features.is_empty() {
        return Err(BanditError::NoArms);
    }
    let beta = match mode {
        NigSelectMode::ExactMean => posterior.mu.clone(),
        NigSelectMode::PosteriorDraw => {
            let var = sample_inverse_gamma(posterior.a, posterior.b, rng)?;
            let chol = posterior.sigma.cholesky()?;
            let z: Vec<f64> = {
                use rand::Rng;
                use rand_distr::StandardNormal;
                (0..posterior.dim())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let lz = chol.lower_matvec(&z);
            posterior
                .mu
                .iter()
                .zip(lz.iter())
                .map(|(m, v)| m + var.sqrt() * v)
                .collect()
        }
    };
    let mut scores = Vec::with_capacity(arm_features.len());
    for phi in arm_features {
        if phi.len() != posterior.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: posterior.dim(),
                got: phi.len(),
            });
        }
        scores.push(phi.iter().zip(beta.iter()).map(|(x, m)| x * m).sum());
    }
    Ok(argmax_tie_low(&scores))
}
