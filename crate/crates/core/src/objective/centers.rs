//! Nyström center selection: uniform without replacement, or approximate
//! leverage-score (ALS) sampling with replacement.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::rng::{stream, streams};

pub fn uniform_centers(m: usize, n_centers: usize, seed: u64) -> Result<Vec<usize>> {
    if n_centers == 0 || n_centers > m {
        return Err(Error::invalid(format!(
            "cannot draw {n_centers} distinct centers from {m} samples"
        )));
    }
    let mut rng = stream(seed, streams::UNIFORM_CENTERS);
    Ok(rand::seq::index::sample(&mut rng, m, n_centers).into_vec())
}

/// `ℓ_i(t) = (K(K + t·m·I)⁻¹)_ii`.
pub fn leverage_scores(k: &DMatrix<f64>, t: f64) -> Result<Vec<f64>> {
    let m = k.nrows();
    if m == 0 || k.ncols() != m {
        return Err(Error::invalid("leverage scores need a non-empty square matrix"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    let scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for j in 0..m {
        for i in 0..j {
            if (k[(i, j)] - k[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::invalid("leverage scores need a symmetric matrix"));
            }
        }
    }
    let mut shifted = k.clone();
    for i in 0..m {
        shifted[(i, i)] += t * m as f64;
    }
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Numeric("K + tmI is not positive definite".to_owned()))?;
    // K and (K + tmI)⁻¹ commute, so the diagonal of (K + tmI)⁻¹K is the answer.
    let solved = chol.solve(k);
    Ok((0..m).map(|i| solved[(i, i)]).collect())
}

/// Draws `n_centers` indices with replacement, index `i` with probability
/// `scores[i] / Σ scores`.
pub fn als_centers(scores: &[f64], n_centers: usize, seed: u64) -> Result<Vec<usize>> {
    if n_centers == 0 {
        return Err(Error::invalid("at least one center is required"));
    }
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("scores must be finite and nonnegative"));
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("score sum must be positive"));
    }
    let dist = WeightedIndex::new(scores).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = stream(seed, streams::ALS_CENTERS);
    Ok((0..n_centers).map(|_| dist.sample(&mut rng)).collect())
}
