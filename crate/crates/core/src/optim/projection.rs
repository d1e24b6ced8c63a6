use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Inputs whose spectral norm is within this slack of the unit ball are treated
/// as feasible and returned untouched, which makes the projection exactly
/// idempotent in floating point.
pub const FEASIBLE_SLACK: f64 = 1e-12;

/// Eigendecomposition of the smaller Gram matrix, `BBᵀ` when `B` is wide and
/// `BᵀB` otherwise. Its eigenvalues are the squared singular values of `B`.
///
/// This is used instead of a full SVD because the SVD with singular vectors can
/// misplace clustered singular values, which breaks idempotence of the
/// projection.
fn gram_eigen(b: &DMatrix<f64>) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, bool)> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".to_owned()));
    }
    let wide = b.nrows() <= b.ncols();
    let gram = if wide { b * b.transpose() } else { b.tr_mul(b) };
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".to_owned()))?;
    Ok((eig, wide))
}

fn max_singular_value(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> f64 {
    eig.eigenvalues.max().max(0.0).sqrt()
}

/// Largest singular value.
pub fn spectral_norm(b: &DMatrix<f64>) -> Result<f64> {
    if b.is_empty() {
        return Ok(0.0);
    }
    Ok(max_singular_value(&gram_eigen(b)?.0))
}

/// Euclidean projection onto `{B : ‖B‖₂ ≤ 1}`: singular values above one are
/// clipped to one.
pub fn project_spectral_ball(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.is_empty() {
        return Ok(b.clone());
    }
    let (eig, wide) = gram_eigen(b)?;
    if max_singular_value(&eig) <= 1.0 + FEASIBLE_SLACK {
        return Ok(b.clone());
    }
    // B − Σ_{σ_k > 1} (1 − 1/σ_k) w_k w_kᵀ B, with w_k the Gram eigenvectors.
    let k = eig.eigenvalues.len();
    let mut shrink = DMatrix::zeros(k, k);
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        let sigma = ev.max(0.0).sqrt();
        if sigma > 1.0 {
            let w = eig.eigenvectors.column(idx);
            shrink += (1.0 - 1.0 / sigma) * (w * w.transpose());
        }
    }
    Ok(if wide { b - &shrink * b } else { b - b * &shrink })
}
