//! Shared test oracles. Everything here computes expected values by an
//! independent route — exhaustive enumeration, plug-in dynamic programming,
//! matrix inversion, or quadrature — never through the estimator under
//! test.

use rand::Rng;
use rand_distr::StandardNormal;

use seqpolicy::core::{Dataset, DatasetSchema, StageRecord, StageSchema, Trajectory};
use seqpolicy::numerics::RngStream;

// ------------------------------------------------------------- tiny MDP --

/// A 2-stage, 2-arm instance with binary states. Stage-1 history is keyed
/// by (x1, a0), four keys in total. Rewards may be deterministic or carry
/// Gaussian noise; transitions may be deterministic or Bernoulli.
pub struct TinyMdp {
    /// Mean stage-1 reward by (x0, a0).
    pub r1: [[f64; 2]; 2],
    /// P(x1 = 1 | x0, a0).
    pub p_next: [[f64; 2]; 2],
    /// Mean stage-2 reward by (key1, a1) with key1 = x1·2 + a0.
    pub r2: [[f64; 2]; 4],
    pub noise_sd: f64,
}

impl TinyMdp {
    pub fn stochastic() -> Self {
        Self {
            r1: [[1.0, 0.2], [-0.5, 1.5]],
            p_next: [[0.7, 0.3], [0.2, 0.9]],
            r2: [[0.0, 2.0], [1.0, -1.0], [3.0, 0.5], [0.25, 0.75]],
            noise_sd: 0.3,
        }
    }

    /// Deterministic rewards and transitions: running-average Q-learning
    /// reproduces the exact dynamic program.
    pub fn deterministic() -> Self {
        Self {
            r1: [[1.0, 0.2], [-0.5, 1.5]],
            p_next: [[1.0, 0.0], [0.0, 1.0]],
            r2: [[0.0, 2.0], [1.0, -1.0], [3.0, 0.5], [0.25, 0.75]],
            noise_sd: 0.0,
        }
    }

    pub fn key1(x1: usize, a0: usize) -> usize {
        x1 * 2 + a0
    }

    pub fn sample(&self, n: usize, rng: &RngStream) -> Dataset {
        let schema = DatasetSchema::fixed(vec![
            StageSchema {
                state_dim: 1,
                action_arity: 2,
            };
            2
        ]);
        let mut trajectories = Vec::with_capacity(n);
        for unit in 0..n {
            let mut stream = rng.substream(unit as u64);
            let x0 = usize::from(stream.random::<f64>() < 0.5);
            let a0 = stream.random_range(0..2usize);
            let y1 = self.r1[x0][a0]
                + self.noise_sd * stream.sample::<f64, _>(StandardNormal);
            let x1 = usize::from(stream.random::<f64>() < self.p_next[x0][a0]);
            let a1 = stream.random_range(0..2usize);
            let y2 = self.r2[Self::key1(x1, a0)][a1]
                + self.noise_sd * stream.sample::<f64, _>(StandardNormal);
            trajectories.push(Trajectory::new(
                format!("u{unit}"),
                vec![
                    StageRecord::new(vec![x0 as f64], a0, Some(y1), 0.5),
                    StageRecord::new(vec![x1 as f64], a1, Some(y2), 0.5),
                ],
            ));
        }
        Dataset::new(schema, trajectories).unwrap()
    }

    /// Exact optimal Q-values from the model itself (true dynamic program):
    /// (Q0[x0][a0], Q1[key1][a1]).
    pub fn true_q(&self, gamma: f64) -> ([[f64; 2]; 2], [[f64; 2]; 4]) {
        let mut q1 = [[0.0; 2]; 4];
        for key in 0..4 {
            for a1 in 0..2 {
                q1[key][a1] = self.r2[key][a1];
            }
        }
        let mut q0 = [[0.0; 2]; 2];
        for x0 in 0..2 {
            for a0 in 0..2 {
                let p1 = self.p_next[x0][a0];
                let cont = |x1: usize| {
                    let key = Self::key1(x1, a0);
                    q1[key][0].max(q1[key][1])
                };
                q0[x0][a0] =
                    self.r1[x0][a0] + gamma * ((1.0 - p1) * cont(0) + p1 * cont(1));
            }
        }
        (q0, q1)
    }

    /// Plug-in dynamic program on the *empirical* distribution of a sampled
    /// dataset: backward cell means. Returns (Q0, Q1, fully_covered).
    pub fn empirical_dp(&self, data: &Dataset, gamma: f64) -> ([[f64; 2]; 2], [[f64; 2]; 4], bool) {
        let mut sum1 = [[0.0; 2]; 4];
        let mut cnt1 = [[0usize; 2]; 4];
        for traj in &data.trajectories {
            let a0 = traj.records[0].action;
            let x1 = traj.records[1].state[0] as usize;
            let a1 = traj.records[1].action;
            let key = Self::key1(x1, a0);
            sum1[key][a1] += traj.records[1].reward.unwrap();
            cnt1[key][a1] += 1;
        }
        let mut q1 = [[0.0; 2]; 4];
        let mut covered = true;
        for key in 0..4 {
            for a1 in 0..2 {
                if cnt1[key][a1] == 0 {
                    covered = false;
                } else {
                    q1[key][a1] = sum1[key][a1] / cnt1[key][a1] as f64;
                }
            }
        }

        let mut sum0 = [[0.0; 2]; 2];
        let mut cnt0 = [[0usize; 2]; 2];
        for traj in &data.trajectories {
            let x0 = traj.records[0].state[0] as usize;
            let a0 = traj.records[0].action;
            let x1 = traj.records[1].state[0] as usize;
            let key = Self::key1(x1, a0);
            let target =
                traj.records[0].reward.unwrap() + gamma * q1[key][0].max(q1[key][1]);
            sum0[x0][a0] += target;
            cnt0[x0][a0] += 1;
        }
        let mut q0 = [[0.0; 2]; 2];
        for x0 in 0..2 {
            for a0 in 0..2 {
                if cnt0[x0][a0] == 0 {
                    covered = false;
                } else {
                    q0[x0][a0] = sum0[x0][a0] / cnt0[x0][a0] as f64;
                }
            }
        }
        (q0, q1, covered)
    }
}

// -------------------------------------------------------- 2-state chain --

/// Time-homogeneous 2-state, 2-action Markov chain with known transitions
/// and mean rewards.
pub struct Chain {
    /// P(s' = 1 | s, a).
    pub p_one: [[f64; 2]; 2],
    /// Mean reward r(s, a).
    pub reward: [[f64; 2]; 2],
    pub noise_sd: f64,
}

impl Chain {
    pub fn example() -> Self {
        Self {
            p_one: [[0.3, 0.8], [0.6, 0.1]],
            reward: [[1.0, 0.0], [2.0, 0.5]],
            noise_sd: 0.2,
        }
    }

    /// Sample trajectories under the uniform behavior policy.
    pub fn sample(&self, n_traj: usize, t_len: usize, rng: &RngStream) -> Dataset {
        let schema = DatasetSchema::indefinite(StageSchema {
            state_dim: 1,
            action_arity: 2,
        });
        let mut trajectories = Vec::with_capacity(n_traj);
        for unit in 0..n_traj {
            let mut stream = rng.substream(unit as u64);
            let mut s = usize::from(stream.random::<f64>() < 0.5);
            let mut records = Vec::with_capacity(t_len);
            for _ in 0..t_len {
                let a = stream.random_range(0..2usize);
                let y = self.reward[s][a]
                    + self.noise_sd * stream.sample::<f64, _>(StandardNormal);
                records.push(StageRecord::new(vec![s as f64], a, Some(y), 0.5));
                s = usize::from(stream.random::<f64>() < self.p_one[s][a]);
            }
            trajectories.push(Trajectory::new(format!("u{unit}"), records));
        }
        Dataset::new(schema, trajectories).unwrap()
    }

    /// Exact V_d = (I − γP_d)⁻¹ r_d for a stochastic policy given by
    /// d(1|s), via a hand 2×2 solve.
    pub fn exact_value(&self, d_one: [f64; 2], gamma: f64) -> [f64; 2] {
        let mut p_d = [[0.0; 2]; 2];
        let mut r_d = [0.0; 2];
        for s in 0..2 {
            for a in 0..2 {
                let da = if a == 1 { d_one[s] } else { 1.0 - d_one[s] };
                p_d[s][1] += da * self.p_one[s][a];
                p_d[s][0] += da * (1.0 - self.p_one[s][a]);
                r_d[s] += da * self.reward[s][a];
            }
        }
        // Solve (I − γ P_d) v = r_d.
        let a11 = 1.0 - gamma * p_d[0][0];
        let a12 = -gamma * p_d[0][1];
        let a21 = -gamma * p_d[1][0];
        let a22 = 1.0 - gamma * p_d[1][1];
        let det = a11 * a22 - a12 * a21;
        [
            (a22 * r_d[0] - a12 * r_d[1]) / det,
            (-a21 * r_d[0] + a11 * r_d[1]) / det,
        ]
    }
}

// -------------------------------------------- NIG quadrature (1-d model) --

/// Posterior mean of a scalar regression coefficient under the
/// Normal-Inverse-Gamma model, by direct 2-d quadrature of
/// prior × likelihood over (β, σ²). Independent of the conjugate algebra.
pub fn nig_posterior_mean_quadrature(
    prior_mu: f64,
    prior_var_scale: f64,
    a: f64,
    b: f64,
    x: &[f64],
    y: &[f64],
    beta_center: f64,
    beta_halfwidth: f64,
) -> f64 {
    let n_beta = 4000;
    let n_var = 2000;
    let beta_lo = beta_center - beta_halfwidth;
    let beta_hi = beta_center + beta_halfwidth;
    let var_lo = 1e-4;
    let var_hi = 60.0;
    let d_beta = (beta_hi - beta_lo) / n_beta as f64;
    let d_var = (var_hi - var_lo) / n_var as f64;

    let log_joint = |beta: f64, var: f64| -> f64 {
        // log IG(var; a, b)
        let mut lp = -(a + 1.0) * var.ln() - b / var;
        // log N(beta; prior_mu, var·scale)
        lp += -0.5 * ((beta - prior_mu).powi(2) / (var * prior_var_scale))
            - 0.5 * (var * prior_var_scale).ln();
        // likelihood
        for (xi, yi) in x.iter().zip(y.iter()) {
            lp += -0.5 * ((yi - xi * beta).powi(2) / var) - 0.5 * var.ln();
        }
        lp
    };

    // Stabilize with the max log density on the grid.
    let mut max_lp = f64::NEG_INFINITY;
    for i in 0..n_beta {
        let beta = beta_lo + (i as f64 + 0.5) * d_beta;
        for j in 0..n_var {
            let var = var_lo + (j as f64 + 0.5) * d_var;
            let lp = log_joint(beta, var);
            if lp > max_lp {
                max_lp = lp;
            }
        }
    }
    let mut mass = 0.0;
    let mut first_moment = 0.0;
    for i in 0..n_beta {
        let beta = beta_lo + (i as f64 + 0.5) * d_beta;
        for j in 0..n_var {
            let var = var_lo + (j as f64 + 0.5) * d_var;
            let w = (log_joint(beta, var) - max_lp).exp();
            mass += w;
            first_moment += beta * w;
        }
    }
    first_moment / mass
}

// --------------------------------------------------------------- misc ----

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
