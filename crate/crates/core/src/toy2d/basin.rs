use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ToyObjective, ToyVariant};
use crate::error::{Error, Result};
use crate::optim::{agd_fit, varpro_fit, Algorithm, FitConfig};

/// Outer-iteration cap per basin run.
pub const BASIN_MAX_ITER: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinCode {
    Both,
    VarproOnly,
    AgdOnly,
    Neither,
}

impl BasinCode {
    pub fn from_outcomes(varpro: bool, agd: bool) -> Self {
        match (varpro, agd) {
            (true, true) => BasinCode::Both,
            (true, false) => BasinCode::VarproOnly,
            (false, true) => BasinCode::AgdOnly,
            (false, false) => BasinCode::Neither,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BasinCode::Both => "both",
            BasinCode::VarproOnly => "varpro_only",
            BasinCode::AgdOnly => "agd_only",
            BasinCode::Neither => "neither",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinRequest {
    pub variant: ToyVariant,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Grid points per axis `(nx, ny)`, endpoints included.
    pub resolution: (usize, usize),
    pub tol: f64,
}

impl Default for BasinRequest {
    fn default() -> Self {
        Self {
            variant: ToyVariant::Square,
            x_range: (-3.0, 3.0),
            y_range: (-3.0, 3.0),
            resolution: (50, 50),
            tol: 1e-4,
        }
    }
}

impl BasinRequest {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !range_ok(self.x_range) || !range_ok(self.y_range) {
            return Err(Error::invalid("basin ranges must be finite with lo < hi"));
        }
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::invalid("basin resolution must be at least 2 per axis"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("basin tolerance must be positive"));
        }
        Ok(())
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        let step = (range.1 - range.0) / (n - 1) as f64;
        (0..n).map(|i| range.0 + step * i as f64).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.resolution.0)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_range, self.resolution.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub x0: f64,
    pub y0: f64,
    pub code: BasinCode,
    pub f_varpro: f64,
    pub f_agd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinMap {
    pub request: BasinRequest,
    /// Row-major over `y`, then `x`.
    pub cells: Vec<BasinCell>,
}

impl BasinMap {
    pub fn fraction(&self, code: BasinCode) -> f64 {
        let n = self.cells.iter().filter(|c| c.code == code).count();
        n as f64 / self.cells.len() as f64
    }
}

/// Final objective value of a run from `(x0, y0)`; errors and stalls count as
/// whatever the last iterate reached.
fn final_value(obj: &ToyObjective, algorithm: Algorithm, x0: f64, y0: f64, cfg: &FitConfig) -> f64 {
    let u0 = DVector::from_element(1, y0);
    let v0 = DVector::from_element(1, x0);
    let cfg = cfg.clone().with_algorithm(algorithm);
    let res = match algorithm {
        Algorithm::Varpro => varpro_fit(obj, &u0, &cfg),
        Algorithm::Agd => agd_fit(obj, &u0, &v0, &cfg),
    };
    match res {
        Ok(r) => r.trace.final_loss(),
        Err(_) => f64::INFINITY,
    }
}

fn run_cell(obj: &ToyObjective, x0: f64, y0: f64, cfg: &FitConfig, tol: f64) -> BasinCell {
    let f_varpro = final_value(obj, Algorithm::Varpro, x0, y0, cfg);
    let f_agd = final_value(obj, Algorithm::Agd, x0, y0, cfg);
    BasinCell {
        x0,
        y0,
        code: BasinCode::from_outcomes(f_varpro <= tol, f_agd <= tol),
        f_varpro,
        f_agd,
    }
}

/// Classifies a single starting point the same way [`basin_map`] does.
pub fn basin_cell(
    variant: ToyVariant,
    x0: f64,
    y0: f64,
    fit_cfg: &FitConfig,
    tol: f64,
) -> Result<BasinCell> {
    fit_cfg.validate()?;
    let mut cfg = fit_cfg.clone();
    cfg.max_iter = cfg.max_iter.min(BASIN_MAX_ITER);
    Ok(run_cell(&ToyObjective::new(variant), x0, y0, &cfg, tol))
}

/// Runs VarPro and AGD from every grid point and records which of them reached
/// the global minimum (`f ≤ tol`).
pub fn basin_map(request: &BasinRequest, fit_cfg: &FitConfig) -> Result<BasinMap> {
    request.validate()?;
    fit_cfg.validate()?;
    let mut cfg = fit_cfg.clone();
    cfg.max_iter = cfg.max_iter.min(BASIN_MAX_ITER);
    let obj = ToyObjective::new(request.variant);
    let xs = request.xs();
    let points: Vec<(f64, f64)> = request
        .ys()
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect();
    let cells = points
        .into_par_iter()
        .map(|(x0, y0)| run_cell(&obj, x0, y0, &cfg, request.tol))
        .collect();
    Ok(BasinMap {
        request: request.clone(),
        cells,
    })
}
