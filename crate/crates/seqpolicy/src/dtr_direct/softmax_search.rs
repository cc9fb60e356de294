use super::DirectError;
use crate::core::{Dataset, FeatureMap, PolicySpec, StageRule};

#[derive(Debug, Clone, Copy)]
pub struct SoftmaxSearchOptions {
    /// Search box per coordinate: ψ ∈ [−half_width, half_width].
    pub half_width: f64,
    /// Step of the initial coordinate scan.
    pub coarse_step: f64,
    /// Refinement stops once the local step shrinks below this.
    pub refine_tol: f64,
    /// Maximum coordinate-descent passes.
    pub max_passes: usize,
}

impl Default for SoftmaxSearchOptions {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            coarse_step: 0.05,
            refine_tol: 1e-4,
            max_passes: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftmaxSearchResult {
    /// Full K×m coefficient array; arm 0 is pinned at zero for
    /// identifiability.
    pub coefs: Vec<Vec<f64>>,
    pub value: f64,
    pub policy: PolicySpec,
}

/// Maximize the self-normalized importance-weighted value over the soft-max
/// policy class π(a_k | h) ∝ exp(−φ(h)ᵀψ_k). The first arm's coefficients
/// are fixed at zero; the remaining (K−1)·m coordinates are searched by a
/// coarse per-coordinate grid scan followed by local bisection refinement,
/// cycled until a pass stops improving. Deterministic.
pub fn policy_search_softmax(
    data: &Dataset,
    n_arms: usize,
    feature_map: &FeatureMap,
    opts: &SoftmaxSearchOptions,
) -> Result<SoftmaxSearchResult, DirectError> {
    if n_arms < 2 {
        return Err(DirectError::InvalidParameter(
            "soft-max search needs at least two arms".into(),
        ));
    }
    // Precompute per-record features, actions, and probabilities once; the
    // objective is then a cheap function of ψ.
    let mut prepared = Vec::with_capacity(data.n_units());
    for traj in &data.trajectories {
        let mut stages = Vec::with_capacity(traj.len());
        for (t, rec) in traj.records.iter().enumerate() {
            if rec.behavior_prob <= 0.0 {
                return Err(DirectError::Positivity {
                    unit: traj.unit_id.clone(),
                    stage: t,
                    prob: rec.behavior_prob,
                });
            }
            stages.push((feature_map.apply(&traj.history(t)), rec.action, rec.behavior_prob));
        }
        prepared.push((stages, traj.total_reward()?));
    }
    let m = prepared[0].0[0].0.len();
    let free = (n_arms - 1) * m;

    let objective = |psi: &[f64]| -> f64 {
        let mut sum_w = 0.0;
        let mut sum_wy = 0.0;
        for (stages, y) in &prepared {
            let mut w = 1.0;
            for (phi, action, pi) in stages {
                w *= softmax_prob(psi, phi, n_arms, m, *action) / pi;
            }
            sum_w += w;
            sum_wy += w * y;
        }
        if sum_w > 0.0 {
            sum_wy / sum_w
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut psi = vec![0.0; free];
    let mut best = objective(&psi);
    for _pass in 0..opts.max_passes {
        let before = best;
        for coord in 0..free {
            // Coarse scan of this coordinate over the box.
            let saved = psi[coord];
            let mut local_best = best;
            let mut local_arg = saved;
            let steps = (2.0 * opts.half_width / opts.coarse_step).round() as usize;
            for i in 0..=steps {
                let candidate = -opts.half_width + i as f64 * opts.coarse_step;
                psi[coord] = candidate;
                let v = objective(&psi);
                if v > local_best {
                    local_best = v;
                    local_arg = candidate;
                }
            }
            // Local refinement around the scan winner.
            let mut step = opts.coarse_step;
            while step > opts.refine_tol {
                let mut moved = false;
                for candidate in [local_arg - step, local_arg + step] {
                    if candidate.abs() > opts.half_width {
                        continue;
                    }
                    psi[coord] = candidate;
                    let v = objective(&psi);
                    if v > local_best {
                        local_best = v;
                        local_arg = candidate;
                        moved = true;
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            psi[coord] = local_arg;
            best = local_best;
        }
        if best <= before + 1e-12 {
            break;
        }
    }

    let mut coefs = vec![vec![0.0; m]];
    for k in 0..(n_arms - 1) {
        coefs.push(psi[k * m..(k + 1) * m].to_vec());
    }
    let policy = PolicySpec::stationary(StageRule::Softmax {
        feature_map: feature_map.clone(),
        coefs: coefs.clone(),
    });
    Ok(SoftmaxSearchResult {
        coefs,
        value: best,
        policy,
    })
}

/// π(action | φ; ψ) with arm 0 pinned at ψ₀ = 0 and logits −φᵀψ_k.
fn softmax_prob(psi: &[f64], phi: &[f64], n_arms: usize, m: usize, action: usize) -> f64 {
    let logit = |k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            -phi
                .iter()
                .zip(psi[(k - 1) * m..k * m].iter())
                .map(|(x, c)| x * c)
                .sum::<f64>()
        }
    };
    let max = (0..n_arms).map(logit).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut chosen = 0.0;
    for k in 0..n_arms {
        let e = (logit(k) - max).exp();
        total += e;
        if k == action {
            chosen = e;
        }
    }
    chosen / total
}
