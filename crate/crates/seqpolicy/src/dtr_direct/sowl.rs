use rand::Rng;
use rand_distr::StandardNormal;

use super::owl::LinearDecisionFn;
use super::DirectError;
use crate::core::{Dataset, FeatureMap, HorizonKind};
use crate::numerics::RngStream;

/// Concave surrogate for the product of two classification indicators:
/// ψ(x₁, x₂) = min(x₁ − 1, x₂ − 1, 0) + 1.
pub fn sowl_surrogate(x1: f64, x2: f64) -> f64 {
    (x1 - 1.0).min(x2 - 1.0).min(0.0) + 1.0
}

#[derive(Debug, Clone, Copy)]
pub struct SowlOptions {
    pub lambda: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub step_scale: f64,
    /// Coefficient box for the projection step.
    pub param_bound: f64,
    /// Seed for the restart initializations; the fit is deterministic
    /// given this seed.
    pub seed: u64,
    pub shift_epsilon: f64,
}

impl Default for SowlOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            restarts: 10,
            max_iters: 2000,
            step_scale: 0.5,
            param_bound: 50.0,
            seed: 0,
            shift_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SowlFit {
    pub stage0: LinearDecisionFn,
    pub stage1: LinearDecisionFn,
    pub objective: f64,
}

/// Simultaneous outcome-weighted learning on a two-stage dataset: maximize
///
/// ```text
/// P_N[ Y·ψ(A₀f₀(H₀), A₁f₁(H₁)) / (π₀π₁) ] − λ(‖f₀‖² + ‖f₁‖²)
/// ```
///
/// by projected subgradient ascent. The joint surrogate is not concave in
/// (f₀, f₁), so the optimizer runs seeded random restarts and keeps the
/// best objective. Intercepts are unpenalized; negative outcomes shift as
/// in OWL.
pub fn sowl_fit(
    data: &Dataset,
    feature_maps: &[FeatureMap; 2],
    opts: &SowlOptions,
) -> Result<SowlFit, DirectError> {
    if !(opts.lambda > 0.0) {
        return Err(DirectError::InvalidParameter(format!(
            "sowl lambda must be positive, got {}",
            opts.lambda
        )));
    }
    match data.schema.horizon {
        HorizonKind::Fixed(2) => {}
        _ => {
            return Err(DirectError::UnsupportedData(
                "simultaneous OWL requires exactly two stages".into(),
            ))
        }
    }
    for t in 0..2 {
        if data.schema.stage(t).action_arity != 2 {
            return Err(DirectError::UnsupportedData(
                "simultaneous OWL handles two arms per stage".into(),
            ));
        }
    }

    let n = data.n_units();
    let mut phi0 = Vec::with_capacity(n);
    let mut phi1 = Vec::with_capacity(n);
    let mut labels0 = Vec::with_capacity(n);
    let mut labels1 = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut inv_prob = Vec::with_capacity(n);
    for traj in &data.trajectories {
        phi0.push(feature_maps[0].apply(&traj.history(0)));
        phi1.push(feature_maps[1].apply(&traj.history(1)));
        labels0.push(if traj.records[0].action == 1 { 1.0 } else { -1.0 });
        labels1.push(if traj.records[1].action == 1 { 1.0 } else { -1.0 });
        outcomes.push(traj.total_reward()?);
        inv_prob.push(1.0 / (traj.records[0].behavior_prob * traj.records[1].behavior_prob));
    }
    let min_y = outcomes.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min_y < 0.0 {
        -min_y + opts.shift_epsilon
    } else {
        0.0
    };
    let weights: Vec<f64> = outcomes
        .iter()
        .zip(inv_prob.iter())
        .map(|(y, ip)| (y + shift) * ip)
        .collect();

    let d0 = phi0[0].len();
    let d1 = phi1[0].len();
    // Parameter vector layout: [w0 (d0), b0, w1 (d1), b1].
    let dim = d0 + d1 + 2;

    let objective = |theta: &[f64]| -> f64 {
        let (w0, b0, w1, b1) = split(theta, d0, d1);
        let mut total = 0.0;
        for i in 0..n {
            let f0 = b0 + dot(&phi0[i], w0);
            let f1 = b1 + dot(&phi1[i], w1);
            total += weights[i] * sowl_surrogate(labels0[i] * f0, labels1[i] * f1);
        }
        total / n as f64
            - opts.lambda * (w0.iter().map(|v| v * v).sum::<f64>()
                + w1.iter().map(|v| v * v).sum::<f64>())
    };

    let mut rng = RngStream::new(opts.seed, 0x50_57_4c);
    let mut best_theta = vec![0.0; dim];
    let mut best_obj = f64::NEG_INFINITY;

    for restart in 0..opts.restarts.max(1) {
        let mut theta: Vec<f64> = if restart == 0 {
            vec![0.0; dim]
        } else {
            (0..dim)
                .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let mut run_best = objective(&theta);
        let mut run_best_theta = theta.clone();

        for k in 0..opts.max_iters {
            let mut grad = vec![0.0; dim];
            {
                let (w0, b0, w1, b1) = split(&theta, d0, d1);
                for i in 0..n {
                    let f0 = b0 + dot(&phi0[i], w0);
                    let f1 = b1 + dot(&phi1[i], w1);
                    let x1 = labels0[i] * f0 - 1.0;
                    let x2 = labels1[i] * f1 - 1.0;
                    // Subgradient of min(x1, x2, 0): first active piece in
                    // the listed order.
                    let scale = weights[i] / n as f64;
                    if x1 <= x2 && x1 <= 0.0 {
                        for (g, x) in grad[..d0].iter_mut().zip(phi0[i].iter()) {
                            *g += scale * labels0[i] * x;
                        }
                        grad[d0] += scale * labels0[i];
                    } else if x2 <= 0.0 {
                        for (g, x) in grad[d0 + 1..d0 + 1 + d1].iter_mut().zip(phi1[i].iter()) {
                            *g += scale * labels1[i] * x;
                        }
                        grad[d0 + 1 + d1] += scale * labels1[i];
                    }
                    // Active piece 0 contributes no gradient.
                }
                for (g, w) in grad[..d0].iter_mut().zip(w0.iter()) {
                    *g -= 2.0 * opts.lambda * w;
                }
                for (g, w) in grad[d0 + 1..d0 + 1 + d1].iter_mut().zip(w1.iter()) {
                    *g -= 2.0 * opts.lambda * w;
                }
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-12);
            let step = opts.step_scale / ((k + 1) as f64).sqrt() / norm;
            for (t, g) in theta.iter_mut().zip(grad.iter()) {
                *t = (*t + step * g).clamp(-opts.param_bound, opts.param_bound);
            }
            let obj = objective(&theta);
            if obj > run_best {
                run_best = obj;
                run_best_theta = theta.clone();
            }
        }
        if run_best > best_obj {
            best_obj = run_best;
            best_theta = run_best_theta;
        }
    }

    let (w0, b0, w1, b1) = split(&best_theta, d0, d1);
    Ok(SowlFit {
        stage0: LinearDecisionFn {
            feature_map: feature_maps[0].clone(),
            coefs: w0.to_vec(),
            intercept: b0,
            outcome_shift: shift,
        },
        stage1: LinearDecisionFn {
            feature_map: feature_maps[1].clone(),
            coefs: w1.to_vec(),
            intercept: b1,
            outcome_shift: shift,
        },
        objective: best_obj,
    })
}

fn split(theta: &[f64], d0: usize, d1: usize) -> (&[f64], f64, &[f64], f64) {
    (
        &theta[..d0],
        theta[d0],
        &theta[d0 + 1..d0 + 1 + d1],
        theta[d0 + 1 + d1],
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
