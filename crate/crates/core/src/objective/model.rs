use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::map_rows;
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::matrix_serde;
use crate::modelsel::truncate;
use crate::optim::spectral_norm;

/// Spectral-norm slack accepted on a fitted map.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// A fitted hyper-kernel predictor `f(x) = Σ_j α_j k(Bx, Bx̃_j)`.
///
/// Center rows are stored alongside their training-set indices, so a model can
/// predict without access to the data it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperModel {
    #[serde(with = "matrix_serde::rows")]
    pub b: DMatrix<f64>,
    pub centers: Vec<usize>,
    #[serde(with = "matrix_serde::rows")]
    pub center_rows: DMatrix<f64>,
    #[serde(with = "matrix_serde::vector")]
    pub alpha: DVector<f64>,
    pub kernel: KernelConfig,
    pub lambda: f64,
    pub trunc_m: Option<f64>,
}

impl HyperModel {
    pub fn new(
        b: DMatrix<f64>,
        centers: Vec<usize>,
        center_rows: DMatrix<f64>,
        alpha: DVector<f64>,
        kernel: KernelConfig,
        lambda: f64,
        trunc_m: Option<f64>,
    ) -> Result<Self> {
        let model = Self {
            b,
            centers,
            center_rows,
            alpha,
            kernel,
            lambda,
            trunc_m,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n == 0 || self.centers.len() != n || self.center_rows.nrows() != n {
            return Err(Error::invalid("model centers and coefficients disagree in length"));
        }
        if self.center_rows.ncols() != self.b.ncols() {
            return Err(Error::invalid("center rows and map disagree in ambient dimension"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("model lambda must be positive"));
        }
        if let Some(m) = self.trunc_m {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::invalid("truncation bound must be positive"));
            }
        }
        let norm = spectral_norm(&self.b)?;
        if norm > 1.0 + FEASIBILITY_SLACK {
            return Err(Error::invalid(format!(
                "map spectral norm {norm} exceeds the unit ball"
            )));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Predictions without truncation.
    pub fn predict_raw(&self, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mapped = map_rows(xs, &self.b)?;
        let mapped_centers = map_rows(&self.center_rows, &self.b)?;
        let k = self.kernel.matrix(&mapped, &mapped_centers)?;
        Ok(k * &self.alpha)
    }

    /// Predictions, clamped to `[−M, M]` when the model carries a bound.
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut f = self.predict_raw(xs)?;
        if let Some(m) = self.trunc_m {
            f.apply(|v| *v = truncate(*v, m));
        }
        Ok(f)
    }
}
