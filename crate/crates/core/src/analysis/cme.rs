use nalgebra::{DMatrix, DVector};

use crate::error::{CdmeError, Result};

/// Birth(+1) / pair-death(−2) chain on `0..=M`:
///
/// `dP_n/dt = λ_d (n+2)(n+1)/2 P_{n+2} − λ_d n(n−1)/2 P_n + γ P_{n−1} − γ P_n`.
///
/// The truncation keeps the `−γ P_M` loss, so the matrix is exactly the pure
/// mode-0 block of the hierarchy generator and column `M` leaks mass.
#[derive(Debug, Clone, PartialEq)]
pub struct CmeSystem {
    pub max_count: usize,
    pub gamma: f64,
    pub lambda_d: f64,
    pub matrix: DMatrix<f64>,
}

pub fn cme_generator(max_count: usize, gamma: f64, lambda_d: f64) -> Result<CmeSystem> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CdmeError::Validation(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    if !(lambda_d.is_finite() && lambda_d >= 0.0) {
        return Err(CdmeError::Validation(format!(
            "lambda_d must be >= 0, got {lambda_d}"
        )));
    }
    let dim = max_count + 1;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        let d = n as f64;
        // same operation order as the hierarchy assembly, for bitwise equality
        m[(n, n)] = -(0.5 * lambda_d * d * (d - 1.0)) - gamma;
        if n + 2 < dim && lambda_d != 0.0 {
            m[(n, n + 2)] = 0.5 * lambda_d * (d + 2.0) * (d + 1.0);
        }
        if n >= 1 {
            m[(n, n - 1)] = gamma;
        }
    }
    Ok(CmeSystem {
        max_count,
        gamma,
        lambda_d,
        matrix: m,
    })
}

impl CmeSystem {
    pub fn dim(&self) -> usize {
        self.max_count + 1
    }

    /// Reflecting variant: births at `n = M` are suppressed instead of lost,
    /// so every column sums to zero.
    pub fn closed_matrix(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        m[(self.max_count, self.max_count)] += self.gamma;
        m
    }

    /// `P(t_i)` for each output time, starting from `p0` at `t = 0`.
    pub fn evolve(&self, p0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        if p0.len() != self.dim() {
            return Err(CdmeError::Validation(format!(
                "initial law has {} entries, expected {}",
                p0.len(),
                self.dim()
            )));
        }
        let mut p = DVector::from_column_slice(p0);
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if !(target.is_finite() && target >= t) {
                return Err(CdmeError::Validation(format!(
                    "output times must be finite and non-decreasing, got {target} after {t}"
                )));
            }
            if target > t {
                p = (&self.matrix * (target - t)).exp() * p;
            }
            t = target;
            out.push(p.as_slice().to_vec());
        }
        Ok(out)
    }

    /// Law started from the empty state.
    pub fn evolve_from_vacuum(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut p0 = vec![0.0; self.dim()];
        p0[0] = 1.0;
        self.evolve(&p0, times)
    }

    /// `‖A p‖∞` for the closed matrix.
    pub fn stationary_residual(&self, p: &[f64]) -> f64 {
        let r = self.closed_matrix() * DVector::from_column_slice(p);
        r.amax()
    }
}

/// Normalized null vector of the closed truncated chain, found by replacing
/// the last balance equation with `Σ π_n = 1` and solving by LU.
pub fn cme_stationary(sys: &CmeSystem) -> Result<Vec<f64>> {
    if !(sys.gamma > 0.0 && sys.lambda_d > 0.0) {
        return Err(CdmeError::Validation(format!(
            "stationary law needs gamma > 0 and lambda_d > 0, got {} and {}",
            sys.gamma, sys.lambda_d
        )));
    }
    let dim = sys.dim();
    let mut a = sys.closed_matrix();
    let mut rhs = DVector::zeros(dim);
    for j in 0..dim {
        a[(dim - 1, j)] = 1.0;
    }
    rhs[dim - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CdmeError::Singular("stationary system is singular".into()))?;
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(CdmeError::Singular(
            "stationary solve produced non-finite values".into(),
        ));
    }
    Ok(pi.as_slice().to_vec())
}
