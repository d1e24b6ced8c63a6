use nalgebra::DVector;

use super::{BacktrackConfig, TwoBlockObjective};
use crate::error::{Error, Result};

/// An accepted backtracking step.
#[derive(Clone, Debug)]
pub struct LinesearchStep {
    pub point: DVector<f64>,
    pub step: f64,
    pub trials: usize,
    pub f_before: f64,
    pub f_after: f64,
    /// `‖∇‖²` at the starting point.
    pub grad_norm_sq: f64,
}

impl LinesearchStep {
    /// True when the gradient vanished and no step was taken.
    pub fn is_null(&self) -> bool {
        self.trials == 0
    }
}

/// Shared backtracking loop: `s ← min(s_prev/(ρδ), s_max)`, then repeatedly
/// `s ← ρs` and test `f(trial(s)) − f_before < −c·s·‖g‖²`.
fn backtrack(
    start: &DVector<f64>,
    f_before: f64,
    grad_norm_sq: f64,
    s_prev: f64,
    cfg: &BacktrackConfig,
    mut trial: impl FnMut(f64) -> Result<(DVector<f64>, f64)>,
) -> Result<LinesearchStep> {
    if grad_norm_sq == 0.0 {
        return Ok(LinesearchStep {
            point: start.clone(),
            step: s_prev,
            trials: 0,
            f_before,
            f_after: f_before,
            grad_norm_sq,
        });
    }
    let mut s = (s_prev / (cfg.rho * cfg.delta)).min(cfg.s_max);
    for trials in 1..=cfg.max_shrinks {
        s *= cfg.rho;
        let (point, f_after) = trial(s)?;
        if f_after - f_before < -cfg.c * s * grad_norm_sq {
            return Ok(LinesearchStep {
                point,
                step: s,
                trials,
                f_before,
                f_after,
                grad_norm_sq,
            });
        }
    }
    Err(Error::StalledLinesearch {
        trials: cfg.max_shrinks,
        last_step: s,
    })
}

/// Projected Armijo step on the `u` block at fixed `v`.
pub fn armijo_step_u<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u: &DVector<f64>,
    v: &DVector<f64>,
    s_prev: f64,
    cfg: &BacktrackConfig,
) -> Result<LinesearchStep> {
    let f_before = obj.eval(u, v)?;
    let grad = obj.grad_u(u, v)?;
    armijo_u_with(obj, u, v, f_before, &grad, s_prev, cfg)
}

pub(crate) fn armijo_u_with<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u: &DVector<f64>,
    v: &DVector<f64>,
    f_before: f64,
    grad: &DVector<f64>,
    s_prev: f64,
    cfg: &BacktrackConfig,
) -> Result<LinesearchStep> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite u-gradient".to_owned()));
    }
    backtrack(u, f_before, grad.norm_squared(), s_prev, cfg, |s| {
        let candidate = obj.project_u(u - grad * s)?;
        let f = obj.eval(&candidate, v)?;
        Ok((candidate, f))
    })
}

/// Armijo step on the unconstrained `v` block at fixed `u`.
pub fn armijo_step_v<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u: &DVector<f64>,
    v: &DVector<f64>,
    s_prev: f64,
    cfg: &BacktrackConfig,
) -> Result<LinesearchStep> {
    let f_before = obj.eval(u, v)?;
    let grad = obj.grad_v(u, v)?;
    armijo_v_with(obj, u, v, f_before, &grad, s_prev, cfg)
}

pub(crate) fn armijo_v_with<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u: &DVector<f64>,
    v: &DVector<f64>,
    f_before: f64,
    grad: &DVector<f64>,
    s_prev: f64,
    cfg: &BacktrackConfig,
) -> Result<LinesearchStep> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite v-gradient".to_owned()));
    }
    backtrack(v, f_before, grad.norm_squared(), s_prev, cfg, |s| {
        let candidate = v - grad * s;
        let f = obj.eval(u, &candidate)?;
        Ok((candidate, f))
    })
}
