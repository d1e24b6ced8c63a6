//! Two-block nonconvex optimization: projected Armijo backtracking, variable
//! projection (VarPro) and alternating gradient descent (AGD).

mod fit;
mod lipschitz;
mod linesearch;
mod projection;
mod trace;

pub use fit::{agd_fit, agd_fit_observed, varpro_fit, varpro_fit_observed, FitResult};
pub use lipschitz::{lipschitz_alpha, power_iteration};
pub use linesearch::{armijo_step_u, armijo_step_v, LinesearchStep};
pub use projection::{project_spectral_ball, spectral_norm, FEASIBLE_SLACK};
pub use trace::{FitTrace, LedgerReport, StopReason, TraceRow, VStep};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of eliminating the `v` block in closed form.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub v: DVector<f64>,
    pub jitter_used: bool,
}

/// An objective `Ψ(u, v) = f(u, v) + i_C(u)` over a constrained nonconvex block
/// `u` and an unconstrained block `v`. Both blocks are flattened into vectors.
pub trait TwoBlockObjective {
    fn eval(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64>;

    fn grad_u(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;

    fn grad_v(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;

    /// Projection onto the feasible set of `u`.
    fn project_u(&self, u: DVector<f64>) -> Result<DVector<f64>> {
        Ok(u)
    }

    /// `argmin_v f(u, v)`, if available in closed form. Required by VarPro.
    fn inner_solve(&self, _u: &DVector<f64>) -> Option<Result<InnerSolution>> {
        None
    }

    /// Smoothness constant of `v ↦ f(u, v)`, used by the fixed-step AGD variant.
    fn v_smoothness(&self, _u: &DVector<f64>) -> Option<Result<f64>> {
        None
    }

    /// Value of the constraint function at `u` (feasible iff `≤ 1`); logged per iterate.
    fn constraint_value(&self, _u: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Cheap lower bound on the conditioning quantity the convergence theory assumes.
    fn conditioning_bound(&self, _u: &DVector<f64>) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Varpro,
    Agd,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Varpro => "varpro",
            Algorithm::Agd => "agd",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varpro" => Ok(Algorithm::Varpro),
            "agd" => Ok(Algorithm::Agd),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// How AGD picks its inner `v` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaStep {
    Linesearch,
    /// Fixed step `1/L` with `L` the `v`-block smoothness constant.
    Lipschitz,
}

/// Non-monotone Armijo backtracking parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktrackConfig {
    /// Contraction factor.
    pub rho: f64,
    /// Dilatation factor; `1` gives the monotone step-size schedule.
    pub delta: f64,
    /// Sufficient-decrease constant.
    pub c: f64,
    pub s_init: f64,
    pub s_max: f64,
    pub max_shrinks: usize,
}

impl Default for BacktrackConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            delta: 0.95,
            c: 1e-4,
            s_init: 1.0,
            s_max: 1e6,
            max_shrinks: 60,
        }
    }
}

impl BacktrackConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.rho < 1.0
            && self.delta > 0.0
            && self.delta <= 1.0
            && self.c > 0.0
            && self.s_init > 0.0
            && self.s_init <= self.s_max
            && self.s_max.is_finite()
            && self.max_shrinks >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid backtracking config {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    /// Inner `v` steps per outer iteration (AGD only).
    pub n_alpha: usize,
    pub max_iter: usize,
    pub time_budget_ms: Option<u64>,
    pub grad_tol: f64,
    pub bt_u: BacktrackConfig,
    pub bt_v: BacktrackConfig,
    pub alpha_step: AlphaStep,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Agd,
            n_alpha: 10,
            max_iter: 2000,
            time_budget_ms: None,
            grad_tol: 1e-8,
            bt_u: BacktrackConfig::default(),
            bt_v: BacktrackConfig::default(),
            alpha_step: AlphaStep::Linesearch,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_alpha == 0 {
            return Err(Error::invalid("n_alpha must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::invalid("grad_tol must be nonnegative"));
        }
        self.bt_u.validate()?;
        self.bt_v.validate()
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }
}
