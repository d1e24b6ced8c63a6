use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_POWER_STEPS: usize = 10_000;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Stops once the eigen-residual `‖Av − μv‖` drops below `rel_tol·μ`; the Rayleigh
/// quotient is then accurate to second order in that residual.
pub fn power_iteration(a: &DMatrix<f64>, rel_tol: f64) -> Result<f64> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid("power iteration needs a non-empty square matrix"));
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64) * 0.7).sin());
    v.normalize_mut();
    for _ in 0..MAX_POWER_STEPS {
        let av = a * &v;
        let mu = v.dot(&av);
        if !mu.is_finite() {
            return Err(Error::Numeric("power iteration diverged".to_owned()));
        }
        let norm = av.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let residual = (&av - &v * mu).norm();
        if residual <= rel_tol * mu.abs() {
            return Ok(mu);
        }
        v = av / norm;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {MAX_POWER_STEPS} steps"
    )))
}

/// Largest eigenvalue of `(1/m)K_mnᵀK_mn + λK_nn`.
pub fn lipschitz_alpha(k_mn: &DMatrix<f64>, k_nn: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if k_mn.ncols() != k_nn.nrows() || k_nn.nrows() != k_nn.ncols() || k_mn.nrows() == 0 {
        return Err(Error::invalid("inconsistent kernel matrix shapes"));
    }
    let m = k_mn.nrows() as f64;
    let h = k_mn.tr_mul(k_mn) / m + k_nn * lambda;
    power_iteration(&h, 1e-6)
}
