//! Two-variable landscapes `f(x, y) = (x − g(y))² + cos(πy) + (1 − y)² + 1`
//! with `g(y) = y²` or the sigmoid. They mimic HKRR: strongly convex in `x`
//! (solved in closed form by `x = g(y)`) and nonconvex in `y`.

mod basin;

pub use basin::{basin_cell, basin_map, BasinCell, BasinCode, BasinMap, BasinRequest, BASIN_MAX_ITER};

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{InnerSolution, TwoBlockObjective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyVariant {
    Square,
    Sigmoid,
}

impl std::str::FromStr for ToyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(ToyVariant::Square),
            "sigmoid" => Ok(ToyVariant::Sigmoid),
            other => Err(Error::invalid(format!("unknown toy variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for ToyVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ToyVariant::Square => "square",
            ToyVariant::Sigmoid => "sigmoid",
        })
    }
}

fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

impl ToyVariant {
    fn link(self, y: f64) -> f64 {
        match self {
            ToyVariant::Square => y * y,
            ToyVariant::Sigmoid => sigmoid(y),
        }
    }

    fn link_slope(self, y: f64) -> f64 {
        match self {
            ToyVariant::Square => 2.0 * y,
            ToyVariant::Sigmoid => {
                let s = sigmoid(y);
                s * (1.0 - s)
            }
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        (x - self.link(y)).powi(2) + (PI * y).cos() + (1.0 - y).powi(2) + 1.0
    }

    /// `argmin_x f(x, y)`.
    pub fn inner_solve(self, y: f64) -> f64 {
        self.link(y)
    }

    /// `(∂f/∂x, ∂f/∂y)`.
    pub fn grad(self, x: f64, y: f64) -> (f64, f64) {
        let r = x - self.link(y);
        let dx = 2.0 * r;
        let dy = -2.0 * r * self.link_slope(y) - PI * (PI * y).sin() - 2.0 * (1.0 - y);
        (dx, dy)
    }
}

/// A toy landscape as a two-block objective with `u = (y)` and `v = (x)`.
#[derive(Clone, Copy, Debug)]
pub struct ToyObjective {
    pub variant: ToyVariant,
}

impl ToyObjective {
    pub fn new(variant: ToyVariant) -> Self {
        Self { variant }
    }
}

impl TwoBlockObjective for ToyObjective {
    fn eval(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Ok(self.variant.eval(v[0], u[0]))
    }

    fn grad_u(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.variant.grad(v[0], u[0]).1))
    }

    fn grad_v(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.variant.grad(v[0], u[0]).0))
    }

    fn inner_solve(&self, u: &DVector<f64>) -> Option<Result<InnerSolution>> {
        Some(Ok(InnerSolution {
            v: DVector::from_element(1, self.variant.inner_solve(u[0])),
            jitter_used: false,
        }))
    }

    fn v_smoothness(&self, _u: &DVector<f64>) -> Option<Result<f64>> {
        Some(Ok(2.0))
    }
}
