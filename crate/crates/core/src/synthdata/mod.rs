//! Synthetic multi-index datasets, splits and CSV persistence.

mod csv_io;

pub use csv_io::{read_csv, write_csv};

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_serde;
use crate::objective::SampleSet;
use crate::optim::spectral_norm;
use crate::rng::{stream, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    /// `z = Σ_j sin((1 + j/d*)π (Bx)_j)`, `x ~ U([−1, 1]^D)`.
    Ds1,
    /// `z = Σ_j sin(0.5 w_j − j) + 0.5 w_{j+1} cos(0.4 w_{j+2} − j + 1)`,
    /// `x ~ U([−10, 10]^D)`, indices wrapping modulo `d*`.
    Ds2,
}

impl std::str::FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ds1" => Ok(Dataset::Ds1),
            "ds2" => Ok(Dataset::Ds2),
            other => Err(Error::invalid(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BMode {
    Random,
    Manual(#[serde(with = "matrix_serde::rows")] DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub dataset: Dataset,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub m: usize,
    pub seed: u64,
    /// Noise variance as a fraction of the empirical variance of `z`.
    pub noise_ratio: f64,
    pub b_mode: BMode,
}

impl GenSpec {
    pub fn new(dataset: Dataset, ambient_dim: usize, latent_dim: usize, m: usize, seed: u64) -> Self {
        Self {
            dataset,
            ambient_dim,
            latent_dim,
            m,
            seed,
            noise_ratio: 0.01,
            b_mode: BMode::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.latent_dim > self.ambient_dim {
            return Err(Error::invalid(format!(
                "latent dimension {} must lie in 1..={}",
                self.latent_dim, self.ambient_dim
            )));
        }
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if !(self.noise_ratio.is_finite() && self.noise_ratio >= 0.0) {
            return Err(Error::invalid("noise ratio must be nonnegative"));
        }
        if let BMode::Manual(b) = &self.b_mode {
            if b.nrows() != self.latent_dim || b.ncols() != self.ambient_dim {
                return Err(Error::invalid(format!(
                    "manual B is {}×{}, expected {}×{}",
                    b.nrows(),
                    b.ncols(),
                    self.latent_dim,
                    self.ambient_dim
                )));
            }
        }
        Ok(())
    }
}

/// A generated dataset with the map that produced it.
#[derive(Clone, Debug)]
pub struct Generated {
    pub data: SampleSet,
    pub b_true: DMatrix<f64>,
}

/// `U[0,1]` entries, rescaled by `1/max(1, ‖B‖₂)`.
pub fn sample_true_b(d: usize, ambient_dim: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || d > ambient_dim {
        return Err(Error::invalid(format!("latent dimension {d} must lie in 1..={ambient_dim}")));
    }
    let mut rng = stream(seed, streams::TRUE_B);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let b = DMatrix::from_fn(d, ambient_dim, |_, _| unit.sample(&mut rng));
    let norm = spectral_norm(&b)?;
    Ok(if norm > 1.0 { b / norm } else { b })
}

pub fn generate(spec: &GenSpec) -> Result<Generated> {
    match spec.dataset {
        Dataset::Ds1 => generate_ds1(spec),
        Dataset::Ds2 => generate_ds2(spec),
    }
}

pub fn generate_ds1(spec: &GenSpec) -> Result<Generated> {
    if spec.dataset != Dataset::Ds1 {
        return Err(Error::invalid("generate_ds1 called with a non-ds1 spec"));
    }
    generate_with(spec, 1.0, ds1_link)
}

pub fn generate_ds2(spec: &GenSpec) -> Result<Generated> {
    if spec.dataset != Dataset::Ds2 {
        return Err(Error::invalid("generate_ds2 called with a non-ds2 spec"));
    }
    generate_with(spec, 10.0, ds2_link)
}

/// Noiseless ds1 link evaluated on a latent point.
pub fn ds1_link(w: &[f64]) -> f64 {
    let d = w.len() as f64;
    w.iter()
        .enumerate()
        .map(|(j, wj)| ((1.0 + (j + 1) as f64 / d) * std::f64::consts::PI * wj).sin())
        .sum()
}

/// Noiseless ds2 link evaluated on a latent point.
pub fn ds2_link(w: &[f64]) -> f64 {
    let d = w.len();
    (1..=d)
        .map(|j| {
            let jf = j as f64;
            let w1 = w[j % d];
            let w2 = w[(j + 1) % d];
            (0.5 * w[j - 1] - jf).sin() + 0.5 * w1 * (0.4 * w2 - jf + 1.0).cos()
        })
        .sum()
}

fn generate_with(spec: &GenSpec, half_width: f64, link: fn(&[f64]) -> f64) -> Result<Generated> {
    spec.validate()?;
    let b_true = match &spec.b_mode {
        BMode::Random => sample_true_b(spec.latent_dim, spec.ambient_dim, spec.seed)?,
        BMode::Manual(b) => b.clone(),
    };
    let mut rng = stream(spec.seed, streams::INPUTS);
    let box_dist = Uniform::new_inclusive(-half_width, half_width).expect("valid range");
    // Row-major draw order so that a row's inputs do not depend on m.
    let mut x = DMatrix::zeros(spec.m, spec.ambient_dim);
    for i in 0..spec.m {
        for j in 0..spec.ambient_dim {
            x[(i, j)] = box_dist.sample(&mut rng);
        }
    }
    let z = noiseless_targets(&x, &b_true, link);
    let y = add_noise(&z, spec.noise_ratio, spec.seed)?;
    Ok(Generated {
        data: SampleSet::new(x, y, Some(z))?,
        b_true,
    })
}

/// Applies `link` to each mapped row `B x_i`.
pub fn noiseless_targets(x: &DMatrix<f64>, b: &DMatrix<f64>, link: fn(&[f64]) -> f64) -> DVector<f64> {
    let w = x * b.transpose();
    DVector::from_iterator(
        w.nrows(),
        w.row_iter().map(|r| link(&r.iter().copied().collect::<Vec<_>>())),
    )
}

fn add_noise(z: &DVector<f64>, noise_ratio: f64, seed: u64) -> Result<DVector<f64>> {
    if noise_ratio == 0.0 {
        return Ok(z.clone());
    }
    let var = population_variance(z);
    if !(var > 0.0) {
        return Err(Error::DegenerateData(
            "noiseless targets have zero variance".to_owned(),
        ));
    }
    let normal = Normal::new(0.0, (noise_ratio * var).sqrt())
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let mut rng = stream(seed, streams::NOISE);
    Ok(z.map(|v| v + normal.sample(&mut rng)))
}

pub(crate) fn population_variance(v: &DVector<f64>) -> f64 {
    let mean = v.mean();
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
}

/// Disjoint train/validation/test partition by seeded shuffle. Validation and
/// test sizes are `⌊f·m⌋`; the remainder goes to train.
pub fn split(
    data: &SampleSet,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(SampleSet, SampleSet, SampleSet)> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(*f > 0.0)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let m = data.len();
    let n_val = (fv * m as f64).floor() as usize;
    let n_test = (fs * m as f64).floor() as usize;
    let n_train = m - n_val - n_test;
    if n_val == 0 || n_test == 0 || n_train == 0 {
        return Err(Error::invalid(format!(
            "split of {m} rows leaves an empty part ({n_train}, {n_val}, {n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream(seed, streams::SPLIT));
    let train = data.select(&order[..n_train])?;
    let val = data.select(&order[n_train..n_train + n_val])?;
    let test = data.select(&order[n_train + n_val..])?;
    Ok((train, val, test))
}

#[cfg(test)]
mod tests;
