//! Dense Cholesky helpers with a jitter-escalation fallback.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// Factorization of a symmetric positive definite matrix, plus the diagonal
/// jitter that had to be added to obtain it.
#[derive(Debug, Clone)]
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ B`.
    pub fn half_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        out
    }

    pub fn half_solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        out
    }

    /// Explicit inverse via `L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.chol.l_dirty().nrows();
        let linv = self.half_solve(&DMatrix::identity(n, n));
        linv.tr_mul(&linv)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }
}

/// Cholesky of `a`, trying it as-is first, then adding `1e-8·trace/n` to the
/// diagonal and escalating by ×10 up to `1e-4·trace/n`.
pub fn cholesky_jitter(a: &DMatrix<f64>, context: &'static str) -> Result<Factor> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Factor { chol: Cholesky::new(DMatrix::zeros(0, 0)).expect("empty"), jitter: 0.0 });
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let scale = (a.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            tracing::debug!(context, jitter, "cholesky needed jitter");
            return Ok(Factor { chol, jitter });
        }
        rel *= 10.0;
    }
    let min_diag = a.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
    Err(Error::Numerical {
        context,
        detail: format!(
            "matrix of size {n} not positive definite after jitter up to {:.1e} (mean diag {scale:.3e}, min diag {min_diag:.3e})",
            JITTER_MAX * scale
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = cholesky_jitter(&a, "test").unwrap();
        assert_eq!(f.jitter, 0.0);
        let inv = a.clone().try_inverse().unwrap();
        assert!((f.inverse() - inv).amax() < 1e-12);
        assert!((f.log_det() - a.determinant().ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_gets_jitter() {
        let a = DMatrix::from_element(3, 3, 1.0);
        let f = cholesky_jitter(&a, "test").unwrap();
        assert!(f.jitter > 0.0);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_jitter(&a, "test"), Err(Error::Numerical { .. })));
    }
}
