use serde::{Deserialize, Serialize};

use super::NumericsError;

const SYMMETRY_TOL: f64 = 1e-10;

/// Dense symmetric positive definite matrix, row-major.
///
/// Symmetry is checked at construction; positive definiteness is checked
/// where it matters, when a Cholesky factorization is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let delta = (data[i * dim + j] - data[j * dim + i]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(NumericsError::NotSymmetric { i, j, delta });
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Rank-one update `A += scale * v vᵀ`. Preserves symmetry exactly.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let si = scale * v[i];
            for j in 0..self.dim {
                self.data[i * self.dim + j] += si * v[j];
            }
        }
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += v;
        }
    }

    pub fn add(&mut self, other: &SpdMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = dot(row, x);
        }
        out
    }

    /// `XᵀX` accumulated from design rows; symmetric by construction.
    pub fn from_gram(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for row in rows {
            m.add_outer(row, 1.0);
        }
        m
    }

    pub fn cholesky(&self) -> Result<Cholesky, NumericsError> {
        Cholesky::factor(self, "")
    }

    fn cholesky_advised(&self, advice: &str) -> Result<Cholesky, NumericsError> {
        Cholesky::factor(self, advice)
    }

    /// Inverse via Cholesky; result is symmetric by symmetrization of the
    /// column solves (they agree to rounding error).
    pub fn inverse(&self) -> Result<SpdMatrix, NumericsError> {
        let chol = self.cholesky()?;
        let d = self.dim;
        let mut inv = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = chol.solve(&e);
            e[j] = 0.0;
            for i in 0..d {
                inv[i * d + j] = col[i];
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (inv[i * d + j] + inv[j * d + i]);
                inv[i * d + j] = avg;
                inv[j * d + i] = avg;
            }
        }
        Ok(SpdMatrix { dim: d, data: inv })
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &SpdMatrix, advice: &str) -> Result<Self, NumericsError> {
        let d = a.dim;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(NumericsError::NotPositiveDefinite {
                            index: i,
                            pivot: s,
                            advice: advice.to_string(),
                        });
                    }
                    l[i * d + j] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Ok(Self { dim: d, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    /// Solve `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.dim);
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * d + k] * y[k];
            }
            y[i] = s / self.lower[i * d + i];
        }
        y
    }

    /// Solve `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.dim);
        let d = self.dim;
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= self.lower[k * d + i] * x[k];
            }
            x[i] = s / self.lower[i * d + i];
        }
        x
    }

    /// `L z` for a vector `z`; turns i.i.d. standard normals into draws with
    /// covariance `A`.
    pub fn lower_matvec(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.dim);
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.lower[i * d + k] * z[k];
            }
            out[i] = s;
        }
        out
    }
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if b.len() != a.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    Ok(a.cholesky()?.solve(b))
}

/// Ridge regression: solve `(XᵀX + λI) β = Xᵀy`.
///
/// `lambda` must be nonnegative; with `lambda = 0` a rank-deficient design
/// surfaces as a factorization error suggesting a positive ridge.
pub fn ridge_fit(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Vec<f64>, NumericsError> {
    if rows.is_empty() {
        return Err(NumericsError::InvalidParameter(
            "ridge_fit requires at least one row".into(),
        ));
    }
    if rows.len() != y.len() {
        return Err(NumericsError::DimensionMismatch {
            expected: rows.len(),
            got: y.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(NumericsError::InvalidParameter(format!(
            "ridge lambda must be nonnegative, got {lambda}"
        )));
    }
    let dim = rows[0].len();
    for r in rows {
        if r.len() != dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
    }
    let mut gram = SpdMatrix::from_gram(rows, dim);
    gram.add_diagonal(lambda);
    let mut xty = vec![0.0; dim];
    for (row, &yi) in rows.iter().zip(y.iter()) {
        for (acc, &xj) in xty.iter_mut().zip(row.iter()) {
            *acc += xj * yi;
        }
    }
    let advice = if lambda == 0.0 {
        "; the design may be rank-deficient, retry with lambda > 0"
    } else {
        ""
    };
    let chol = gram.cholesky_advised(advice)?;
    Ok(chol.solve(&xty))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use rand::Rng;

    #[test]
    fn solve_identity() {
        let a = SpdMatrix::identity(3);
        let x = solve_spd(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_diagonal_by_hand() {
        let a = SpdMatrix::new(2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let x = solve_spd(&a, &[8.0, 18.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve_two_by_two_elimination() {
        let a = SpdMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let x = solve_spd(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let err = SpdMatrix::new(2, vec![1.0, 0.5, 0.2, 1.0]).unwrap_err();
        assert!(matches!(err, NumericsError::NotSymmetric { .. }));
    }

    #[test]
    fn non_pd_reports_pivot() {
        let a = SpdMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let err = a.cholesky().unwrap_err();
        assert!(matches!(err, NumericsError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn residual_bound_on_random_pd_matrices() {
        // The contract: ‖Ax − b‖∞ ≤ 1e-8·(1 + ‖b‖∞), checked on 1000 random
        // PD systems up to dimension 20.
        let mut rng = RngStream::new(7, 0);
        for trial in 0..1000u32 {
            let d = 1 + (trial as usize % 20);
            let mut rows = Vec::with_capacity(d);
            for _ in 0..d {
                rows.push((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
            }
            let mut a = SpdMatrix::from_gram(&rows, d);
            a.add_diagonal(0.1);
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let ax = a.matvec(&x);
            let resid = ax
                .iter()
                .zip(b.iter())
                .map(|(l, r)| (l - r).abs())
                .fold(0.0, f64::max);
            let bmax = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(
                resid <= 1e-8 * (1.0 + bmax),
                "trial {trial}: residual {resid:e} above bound"
            );
        }
    }

    #[test]
    fn ridge_ols_mean_oracle() {
        // X = [[1],[1]], y = (2,4), λ=0 → β is the sample mean 3.
        let beta = ridge_fit(&[vec![1.0], vec![1.0]], &[2.0, 4.0], 0.0).unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_identity_design_by_hand() {
        let beta = ridge_fit(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], 1.0).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-12);
        assert!((beta[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ridge_penalty_dominance() {
        // ‖β‖ ≤ ‖Xᵀy‖/λ, so β → 0 as λ grows.
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        let y = [1.0, 2.0, 3.0];
        let lambda = 1e9;
        let beta = ridge_fit(&rows, &y, lambda).unwrap();
        let mut xty = [0.0, 0.0];
        for (r, &yi) in rows.iter().zip(y.iter()) {
            xty[0] += r[0] * yi;
            xty[1] += r[1] * yi;
        }
        let xty_norm = (xty[0] * xty[0] + xty[1] * xty[1]).sqrt();
        let beta_norm = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
        assert!(beta_norm <= xty_norm / lambda + 1e-15);
        assert!(beta_norm < 1e-6);
    }

    #[test]
    fn ridge_singular_design_advises_lambda() {
        // Two identical columns: XᵀX singular at λ=0.
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let err = ridge_fit(&rows, &[1.0, 2.0], 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda > 0"), "unhelpful message: {msg}");
        assert!(ridge_fit(&rows, &[1.0, 2.0], 1e-6).is_ok());
    }

    #[test]
    fn ridge_zero_lambda_matches_normal_equations_on_full_rank() {
        let mut rng = RngStream::new(11, 3);
        for _ in 0..50 {
            let n = 12;
            let d = 4;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let beta = ridge_fit(&rows, &y, 0.0).unwrap();
            // Brute-force normal equations with an independent Gauss-Jordan solve.
            let mut aug = vec![vec![0.0; d + 1]; d];
            for i in 0..d {
                for j in 0..d {
                    aug[i][j] = rows.iter().map(|r| r[i] * r[j]).sum();
                }
                aug[i][d] = rows.iter().zip(y.iter()).map(|(r, &yi)| r[i] * yi).sum();
            }
            for col in 0..d {
                let pivot_row = (col..d)
                    .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
                    .unwrap();
                aug.swap(col, pivot_row);
                let p = aug[col][col];
                for j in col..=d {
                    aug[col][j] /= p;
                }
                for r in 0..d {
                    if r != col {
                        let f = aug[r][col];
                        for j in col..=d {
                            aug[r][j] -= f * aug[col][j];
                        }
                    }
                }
            }
            for i in 0..d {
                assert!(
                    (beta[i] - aug[i][d]).abs() < 1e-8,
                    "coefficient {i} differs: {} vs {}",
                    beta[i],
                    aug[i][d]
                );
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let mut a = SpdMatrix::from_gram(&[vec![1.0, 2.0], vec![-1.0, 0.5]], 2);
        a.add_diagonal(0.5);
        let inv = a.inverse().unwrap();
        let prod_col0 = a.matvec(&[inv.get(0, 0), inv.get(1, 0)]);
        assert!((prod_col0[0] - 1.0).abs() < 1e-10);
        assert!(prod_col0[1].abs() < 1e-10);
    }
}
