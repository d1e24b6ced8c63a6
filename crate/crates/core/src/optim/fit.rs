use std::time::Instant;

use nalgebra::DVector;

use super::linesearch::{armijo_u_with, armijo_v_with};
use super::trace::{FitTrace, StopReason, TraceRow, VStep};
use super::{AlphaStep, FitConfig, LinesearchStep, TwoBlockObjective};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FitResult {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub trace: FitTrace,
}

fn elapsed_ms(start: &Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn out_of_time(cfg: &FitConfig, start: &Instant) -> bool {
    cfg.time_budget_ms
        .is_some_and(|budget| start.elapsed().as_millis() >= u128::from(budget))
}

fn inner<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u: &DVector<f64>,
    iteration: usize,
) -> Result<super::InnerSolution> {
    obj.inner_solve(u)
        .unwrap_or_else(|| {
            Err(Error::invalid(
                "VarPro requires an objective with a closed-form inner solve",
            ))
        })
        .map_err(|e| Error::InnerSolve {
            iteration,
            source: Box::new(e),
        })
}

/// Variable projection: Armijo steps on `u`, with `v` re-solved in closed form
/// after every step.
pub fn varpro_fit<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u0: &DVector<f64>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    varpro_fit_observed(obj, u0, cfg, &mut |_, _, _| {})
}

/// [`varpro_fit`] with a callback invoked on the initial point and after every
/// outer iteration.
pub fn varpro_fit_observed<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u0: &DVector<f64>,
    cfg: &FitConfig,
    observe: &mut dyn FnMut(usize, &DVector<f64>, &DVector<f64>),
) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut u = obj.project_u(u0.clone())?;
    let sol = inner(obj, &u, 0)?;
    let mut v = sol.v;
    let mut loss = obj.eval(&u, &v)?;
    let mut grad = obj.grad_u(&u, &v)?;

    let mut trace = FitTrace::new(cfg, loss, grad.norm());
    trace.initial_constraint = obj.constraint_value(&u);
    trace.jitter_used = sol.jitter_used;
    observe(0, &u, &v);

    let mut s_u = cfg.bt_u.s_init;
    trace.stop = StopReason::MaxIter;
    for iter in 0..cfg.max_iter {
        if grad.norm() <= cfg.grad_tol {
            trace.stop = StopReason::GradTol;
            break;
        }
        if out_of_time(cfg, &start) {
            trace.stop = StopReason::TimeBudget;
            break;
        }
        let step = match armijo_u_with(obj, &u, &v, loss, &grad, s_u, &cfg.bt_u) {
            Ok(step) => step,
            Err(Error::StalledLinesearch { .. }) => {
                trace.stop = StopReason::StalledLinesearch;
                break;
            }
            Err(e) => return Err(e),
        };
        let grad_u_norm = grad.norm();
        s_u = step.step;
        let u_next = step.point;
        let sol = inner(obj, &u_next, iter + 1)?;
        let v_next = sol.v;
        let loss_next = obj.eval(&u_next, &v_next)?;
        let grad_v_norm = obj.grad_v(&u_next, &v_next)?.norm();

        trace.jitter_used |= sol.jitter_used;
        trace.rows.push(TraceRow {
            iter,
            loss: loss_next,
            loss_before: loss,
            loss_after_u: step.f_after,
            grad_u_norm,
            grad_v_norm,
            s_u,
            s_v: 0.0,
            armijo_trials_u: step.trials,
            armijo_trials_v: 0,
            v_steps: Vec::new(),
            jitter_used: sol.jitter_used,
            constraint: obj.constraint_value(&u_next),
            conditioning_bound: obj.conditioning_bound(&u_next),
            wall_ms: elapsed_ms(&start),
        });
        u = u_next;
        v = v_next;
        loss = loss_next;
        grad = obj.grad_u(&u, &v)?;
        observe(iter + 1, &u, &v);
    }
    if trace.stop == StopReason::MaxIter && grad.norm() <= cfg.grad_tol {
        trace.stop = StopReason::GradTol;
    }
    Ok(FitResult { u, v, trace })
}

/// Alternating gradient descent: one projected Armijo step on `u`, then
/// `n_alpha` gradient steps on `v` at the new `u`.
pub fn agd_fit<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    agd_fit_observed(obj, u0, v0, cfg, &mut |_, _, _| {})
}

pub fn agd_fit_observed<O: TwoBlockObjective + ?Sized>(
    obj: &O,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    cfg: &FitConfig,
    observe: &mut dyn FnMut(usize, &DVector<f64>, &DVector<f64>),
) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut u = obj.project_u(u0.clone())?;
    let mut v = v0.clone();
    let mut loss = obj.eval(&u, &v)?;
    let mut grad_u = obj.grad_u(&u, &v)?;
    let mut grad_v = obj.grad_v(&u, &v)?;

    let mut trace = FitTrace::new(cfg, loss, grad_u.norm());
    trace.initial_constraint = obj.constraint_value(&u);
    observe(0, &u, &v);

    let mut s_u = cfg.bt_u.s_init;
    let mut s_v = cfg.bt_v.s_init;
    trace.stop = StopReason::MaxIter;
    let joint_norm = |gu: &DVector<f64>, gv: &DVector<f64>| {
        (gu.norm_squared() + gv.norm_squared()).sqrt()
    };

    for iter in 0..cfg.max_iter {
        if joint_norm(&grad_u, &grad_v) <= cfg.grad_tol {
            trace.stop = StopReason::GradTol;
            break;
        }
        if out_of_time(cfg, &start) {
            trace.stop = StopReason::TimeBudget;
            break;
        }
        let step = match armijo_u_with(obj, &u, &v, loss, &grad_u, s_u, &cfg.bt_u) {
            Ok(step) => step,
            Err(Error::StalledLinesearch { .. }) => {
                trace.stop = StopReason::StalledLinesearch;
                break;
            }
            Err(e) => return Err(e),
        };
        let grad_u_norm = grad_u.norm();
        s_u = step.step;
        let u_next = step.point;
        let loss_after_u = step.f_after;

        let lipschitz_step = match cfg.alpha_step {
            AlphaStep::Linesearch => None,
            AlphaStep::Lipschitz => {
                let l = obj
                    .v_smoothness(&u_next)
                    .ok_or_else(|| Error::invalid("objective does not provide a v-smoothness constant"))??;
                if !(l.is_finite() && l > 0.0) {
                    return Err(Error::Numeric(format!("invalid smoothness constant {l}")));
                }
                Some(1.0 / l)
            }
        };

        let mut v_cur = v.clone();
        let mut f_cur = loss_after_u;
        let mut v_steps = Vec::with_capacity(cfg.n_alpha);
        let mut trials_v = 0;
        for _ in 0..cfg.n_alpha {
            let g = obj.grad_v(&u_next, &v_cur)?;
            let accepted: LinesearchStep = match lipschitz_step {
                Some(s) => {
                    let point = &v_cur - &g * s;
                    let f_after = obj.eval(&u_next, &point)?;
                    LinesearchStep {
                        point,
                        step: s,
                        trials: 1,
                        f_before: f_cur,
                        f_after,
                        grad_norm_sq: g.norm_squared(),
                    }
                }
                None => match armijo_v_with(obj, &u_next, &v_cur, f_cur, &g, s_v, &cfg.bt_v) {
                    Ok(step) => step,
                    Err(Error::StalledLinesearch { .. }) => break,
                    Err(e) => return Err(e),
                },
            };
            if accepted.is_null() {
                break;
            }
            if lipschitz_step.is_none() {
                s_v = accepted.step;
            }
            trials_v += accepted.trials;
            v_steps.push(VStep {
                f_before: accepted.f_before,
                f_after: accepted.f_after,
                step: accepted.step,
                grad_norm_sq: accepted.grad_norm_sq,
                trials: accepted.trials,
            });
            f_cur = accepted.f_after;
            v_cur = accepted.point;
        }

        u = u_next;
        v = v_cur;
        loss = f_cur;
        grad_u = obj.grad_u(&u, &v)?;
        grad_v = obj.grad_v(&u, &v)?;
        trace.rows.push(TraceRow {
            iter,
            loss,
            loss_before: step.f_before,
            loss_after_u,
            grad_u_norm,
            grad_v_norm: grad_v.norm(),
            s_u,
            s_v: v_steps.last().map_or(s_v, |s| s.step),
            armijo_trials_u: step.trials,
            armijo_trials_v: trials_v,
            v_steps,
            jitter_used: false,
            constraint: obj.constraint_value(&u),
            conditioning_bound: obj.conditioning_bound(&u),
            wall_ms: elapsed_ms(&start),
        });
        observe(iter + 1, &u, &v);
    }
    if trace.stop == StopReason::MaxIter && joint_norm(&grad_u, &grad_v) <= cfg.grad_tol {
        trace.stop = StopReason::GradTol;
    }
    Ok(FitResult { u, v, trace })
}
