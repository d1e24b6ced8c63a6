//! Mother kernels on the reduced space.
//!
//! Only radial kernels `k(a, b) = φ(‖a − b‖²)` are supported, which is what lets
//! the objective module assemble `∇_B` from the scalar profile derivative `φ'`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

/// A mother kernel with its bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelConfig")]
pub struct KernelConfig {
    family: KernelFamily,
    gamma: f64,
}

#[derive(Deserialize)]
struct RawKernelConfig {
    family: KernelFamily,
    gamma: f64,
}

impl TryFrom<RawKernelConfig> for KernelConfig {
    type Error = Error;

    fn try_from(raw: RawKernelConfig) -> Result<Self> {
        KernelConfig::new(raw.family, raw.gamma)
    }
}

impl KernelConfig {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { family, gamma })
    }

    /// `k(a, b) = exp(−γ‖a − b‖²)`.
    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    #[cfg(test)]
    pub(crate) fn gaussian_unchecked(gamma: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            gamma,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.family, gamma)
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub(crate) fn profile(&self, sq_dist: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.gamma * sq_dist).exp(),
        }
    }

    /// `φ'(r²)` expressed through the kernel value `φ(r²)`.
    #[inline]
    pub(crate) fn profile_slope(&self, value: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => -self.gamma * value,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims(a.len(), b.len())?;
        Ok(self.profile(sq_dist(a, b)))
    }

    /// Gradient with respect to the first argument. The gradient with respect
    /// to the second argument is its negation.
    pub fn grad1(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        check_dims(a.len(), b.len())?;
        let value = self.profile(sq_dist(a, b));
        let scale = 2.0 * self.profile_slope(value);
        Ok(a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect())
    }

    /// Gram matrix between the rows of `a` (p×d) and the rows of `b` (q×d).
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dims(a.ncols(), b.ncols())?;
        Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            self.profile(row_sq_dist(a, i, b, j))
        }))
    }

    /// Symmetric Gram matrix of the rows of `a`; only the upper triangle is evaluated.
    pub fn gram(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            k[(j, j)] = self.profile(0.0);
            for i in 0..j {
                let v = self.profile(row_sq_dist(a, i, a, j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

// Squared distances are summed from coordinate differences, so coincident points
// give exactly zero and the result can never be negative.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols())
        .map(|k| {
            let t = a[(i, k)] - b[(j, k)];
            t * t
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn eval_examples() {
        let k = KernelConfig::gaussian(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -0.7], &[0.3, -0.7]).unwrap(), 1.0);
        let k = KernelConfig::gaussian(0.5).unwrap();
        assert!((k.eval(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k.eval(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - 0.60653).abs() < 1e-5);
        let k = KernelConfig::gaussian(2.0).unwrap();
        assert!((k.eval(&[1.0, 1.0], &[0.0, 0.0]).unwrap() - 0.018316).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_gamma_and_dims() {
        assert!(KernelConfig::gaussian(0.0).is_err());
        assert!(KernelConfig::gaussian(f64::NAN).is_err());
        assert!(KernelConfig::gaussian(-1.0).is_err());
        let k = KernelConfig::gaussian(1.0).unwrap();
        assert!(matches!(k.eval(&[1.0], &[1.0, 2.0]), Err(Error::InvalidArgument(_))));
        assert!(k.grad1(&[1.0], &[1.0, 2.0]).is_err());
        assert!(k.matrix(&DMatrix::zeros(2, 3), &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn grad1_examples() {
        let k = KernelConfig::gaussian(1.0).unwrap();
        assert_eq!(k.grad1(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), vec![0.0, 0.0]);
        let g = k.grad1(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g[0] + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((g[0] + 0.73576).abs() < 1e-5);
        assert_eq!(g[1], 0.0);
    }

    fn fd_grad1(k: &KernelConfig, a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
        (0..a.len())
            .map(|i| {
                let mut ap = a.to_vec();
                let mut am = a.to_vec();
                ap[i] += h;
                am[i] -= h;
                (k.eval(&ap, b).unwrap() - k.eval(&am, b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(1e-12)
    }

    #[test]
    fn grad1_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let k = KernelConfig::gaussian(0.7).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = k.grad1(&a, &b).unwrap();
            assert!(rel_err(&g, &fd_grad1(&k, &a, &b, 1e-6)) <= 1e-6);
        }
        // Gradient in the second argument is the negation.
        let a = [0.1, 0.5];
        let b = [-0.3, 0.2];
        let g2: Vec<f64> = fd_grad1(&k, &b, &a, 1e-6);
        let g1 = k.grad1(&a, &b).unwrap();
        assert!(rel_err(&g2, &g1.iter().map(|v| -v).collect::<Vec<_>>()) < 1e-6);
    }

    #[test]
    fn matrix_is_entrywise_and_gram_is_psd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let k = KernelConfig::gaussian(1.3).unwrap();
        let a = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let m = k.matrix(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let ai: Vec<f64> = a.row(i).iter().copied().collect();
                let bj: Vec<f64> = b.row(j).iter().copied().collect();
                assert_eq!(m[(i, j)], k.eval(&ai, &bj).unwrap());
            }
        }
        let p = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = k.gram(&p);
        assert_eq!(g, k.matrix(&p, &p).unwrap());
        assert_eq!(g, g.transpose());
        for i in 0..12 {
            assert_eq!(g[(i, i)], 1.0);
        }
        let min_eig = SymmetricEigen::new(g).eigenvalues.min();
        assert!(min_eig >= -1e-10);
    }

    proptest! {
        #[test]
        fn eval_is_symmetric_and_bounded(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            gamma in 1e-3f64..5.0,
        ) {
            let k = KernelConfig::gaussian(gamma).unwrap();
            let ab = k.eval(&a, &b).unwrap();
            prop_assert_eq!(ab, k.eval(&b, &a).unwrap());
            prop_assert!(ab > 0.0 || sq_dist(&a, &b) * gamma > 700.0);
            prop_assert!(ab <= 1.0);
            if a != b && sq_dist(&a, &b) * gamma > 1e-12 {
                prop_assert!(ab < 1.0);
            }
        }
    }
}
