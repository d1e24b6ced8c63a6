//! Model selection around a single HKRR fit: bandwidth heuristic, initial map
//! selection, output truncation, hold-out cross-validation and metrics.

mod cv;
mod heuristics;
mod metrics;

pub use cv::{argmin_row, cross_validate, CenterStrategy, CvGrid, CvResult, CvRow, CvSettings};
pub use heuristics::{
    init_candidates, median_heuristic, median_heuristic_mapped, select_initialization, truncate,
    InitChoice, InitSetup, DEFAULT_MEDIAN_CAP,
};
pub use metrics::{mse, r2};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::objective::{HkrrObjective, HkrrProblem, HyperModel};
use crate::optim::{agd_fit, varpro_fit, Algorithm, FitConfig, FitTrace};

/// A fitted model and the optimizer trace that produced it.
#[derive(Clone, Debug)]
pub struct HkrrFit {
    pub model: HyperModel,
    pub trace: FitTrace,
}

/// Optimizes `(B, α)` from the initial map `b0`. AGD starts from the
/// closed-form coefficients at `b0`.
pub fn fit_hkrr(
    problem: &HkrrProblem<'_>,
    b0: &DMatrix<f64>,
    cfg: &FitConfig,
    trunc_m: Option<f64>,
) -> Result<HkrrFit> {
    let obj = HkrrObjective::new(problem, b0.nrows());
    let u0 = HkrrObjective::to_vector(b0);
    let result = match cfg.algorithm {
        Algorithm::Varpro => varpro_fit(&obj, &u0, cfg)?,
        Algorithm::Agd => {
            let alpha0 = problem.solve_alpha(b0)?;
            let mut res = agd_fit(&obj, &u0, &alpha0.alpha, cfg)?;
            res.trace.jitter_used |= alpha0.jitter_used;
            res
        }
    };
    let model = problem.to_model(obj.to_matrix(&result.u), result.v, trunc_m)?;
    Ok(HkrrFit {
        model,
        trace: result.trace,
    })
}

/// Closed-form coefficients at a fixed map, reported as a zero-iteration fit.
pub fn fit_fixed_b(
    problem: &HkrrProblem<'_>,
    b: &DMatrix<f64>,
    cfg: &FitConfig,
    trunc_m: Option<f64>,
) -> Result<HkrrFit> {
    let sol = problem.solve_alpha(b)?;
    let loss = problem.loss(b, &sol.alpha)?;
    let grad = problem.grad_b(b, &sol.alpha)?.norm();
    let mut trace = FitTrace::new(cfg, loss, grad);
    trace.jitter_used = sol.jitter_used;
    trace.initial_constraint = crate::optim::spectral_norm(b).ok();
    let model = problem.to_model(b.clone(), sol.alpha, trunc_m)?;
    Ok(HkrrFit { model, trace })
}
