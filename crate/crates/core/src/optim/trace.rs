use serde::{Deserialize, Serialize};

use super::{Algorithm, FitConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MaxIter,
    TimeBudget,
    StalledLinesearch,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::GradTol => "grad_tol",
            StopReason::MaxIter => "max_iter",
            StopReason::TimeBudget => "time_budget",
            StopReason::StalledLinesearch => "stalled_linesearch",
        })
    }
}

/// One accepted inner `v` step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VStep {
    pub f_before: f64,
    pub f_after: f64,
    pub step: f64,
    pub grad_norm_sq: f64,
    pub trials: usize,
}

/// Ledger entry for one outer iteration `i → i+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `f(u^{i+1}, v^{i+1})`.
    pub loss: f64,
    /// `f(u^i, v^i)`.
    pub loss_before: f64,
    /// `f(u^{i+1}, v^i)`.
    pub loss_after_u: f64,
    /// `‖∇_u f(u^i, v^i)‖`.
    pub grad_u_norm: f64,
    /// `‖∇_v f(u^{i+1}, v^{i+1})‖`.
    pub grad_v_norm: f64,
    pub s_u: f64,
    /// Last accepted inner step (0 for VarPro).
    pub s_v: f64,
    pub armijo_trials_u: usize,
    pub armijo_trials_v: usize,
    pub v_steps: Vec<VStep>,
    pub jitter_used: bool,
    /// Constraint value at `u^{i+1}`, e.g. the spectral norm of `B`.
    pub constraint: Option<f64>,
    /// Gershgorin-type lower bound on `λ_min(K_nn)` at `u^{i+1}`.
    pub conditioning_bound: Option<f64>,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl TraceRow {
    pub fn u_step_taken(&self) -> bool {
        self.armijo_trials_u > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub algorithm: Algorithm,
    pub c_u: f64,
    pub c_v: f64,
    /// Dilatation of the `u` schedule; `1` means monotone step sizes.
    pub delta_u: f64,
    pub initial_loss: f64,
    pub initial_grad_u_norm: f64,
    pub initial_constraint: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
    pub jitter_used: bool,
}

/// Outcome of replaying a trace against the descent guarantees.
#[derive(Clone, Debug, Default)]
pub struct LedgerReport {
    pub checks: usize,
    pub violations: Vec<String>,
    /// `Σ c·s_u·‖∇_u‖²` over accepted outer steps.
    pub u_energy: f64,
}

impl LedgerReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl FitTrace {
    pub(crate) fn new(cfg: &FitConfig, initial_loss: f64, initial_grad_u_norm: f64) -> Self {
        Self {
            algorithm: cfg.algorithm,
            c_u: cfg.bt_u.c,
            c_v: cfg.bt_v.c,
            delta_u: cfg.bt_u.delta,
            initial_loss,
            initial_grad_u_norm,
            initial_constraint: None,
            rows: Vec::new(),
            stop: StopReason::MaxIter,
            jitter_used: false,
        }
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(self.initial_loss, |r| r.loss)
    }

    /// `min_{i<N} ‖∇_u‖²` for each prefix length `N = 1..=rows`.
    pub fn running_min_grad_sq(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.min(r.grad_u_norm * r.grad_u_norm);
                best
            })
            .collect()
    }

    /// Replays every inequality the backtracking scheme guarantees:
    /// each accepted step's Armijo condition, the telescoped energy bound
    /// `Σ c·s·‖∇‖² ≤ f⁰ − f^N ≤ f⁰` (for nonnegative objectives), loss
    /// monotonicity and feasibility of every recorded iterate. Each inequality
    /// is allowed `slack`.
    pub fn verify_ledger(&self, slack: f64) -> LedgerReport {
        let mut report = LedgerReport::default();
        let check = |ok: bool, msg: String, report: &mut LedgerReport| {
            report.checks += 1;
            if !ok {
                report.violations.push(msg);
            }
        };
        let feasible = |c: Option<f64>| c.is_none_or(|c| c <= 1.0 + 1e-9);

        check(
            feasible(self.initial_constraint),
            format!("initial iterate infeasible: {:?}", self.initial_constraint),
            &mut report,
        );

        let mut energy = 0.0;
        let mut v_energy = 0.0;
        let mut prev_loss = self.initial_loss;
        for row in &self.rows {
            let i = row.iter;
            check(
                (row.loss_before - prev_loss).abs() <= slack * (1.0 + prev_loss.abs()),
                format!("iter {i}: loss_before {} != previous loss {prev_loss}", row.loss_before),
                &mut report,
            );
            if row.u_step_taken() {
                let g2 = row.grad_u_norm * row.grad_u_norm;
                let bound = -self.c_u * row.s_u * g2;
                check(
                    row.loss_after_u - row.loss_before < bound + slack,
                    format!(
                        "iter {i}: u-step Armijo violated ({} vs {bound})",
                        row.loss_after_u - row.loss_before
                    ),
                    &mut report,
                );
                energy += self.c_u * row.s_u * g2;
            }
            let mut inner_prev = row.loss_after_u;
            for (j, vs) in row.v_steps.iter().enumerate() {
                let bound = -self.c_v * vs.step * vs.grad_norm_sq;
                check(
                    (vs.f_before - inner_prev).abs() <= slack * (1.0 + inner_prev.abs()),
                    format!("iter {i}.{j}: inner chain broken"),
                    &mut report,
                );
                check(
                    vs.f_after - vs.f_before < bound + slack,
                    format!("iter {i}.{j}: v-step Armijo violated"),
                    &mut report,
                );
                v_energy += self.c_v * vs.step * vs.grad_norm_sq;
                inner_prev = vs.f_after;
            }
            // The inner update (closed form or gradient steps) never increases the loss.
            check(
                row.loss <= row.loss_after_u + slack,
                format!("iter {i}: inner update increased the loss"),
                &mut report,
            );
            check(
                row.loss <= prev_loss + slack,
                format!("iter {i}: loss increased {prev_loss} -> {}", row.loss),
                &mut report,
            );
            check(
                feasible(row.constraint),
                format!("iter {i}: iterate infeasible ({:?})", row.constraint),
                &mut report,
            );
            prev_loss = row.loss;
        }

        let n = self.rows.len().max(1) as f64;
        let decrease = self.initial_loss - self.final_loss();
        check(
            energy + v_energy <= decrease + slack * n,
            format!("energy {} exceeds total decrease {decrease}", energy + v_energy),
            &mut report,
        );
        check(
            decrease <= self.initial_loss + slack,
            format!("decrease {decrease} exceeds initial loss {}", self.initial_loss),
            &mut report,
        );
        report.u_energy = energy;
        report
    }
}
