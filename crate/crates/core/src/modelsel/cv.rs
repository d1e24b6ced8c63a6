use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heuristics::{init_candidates, median_heuristic_mapped, InitChoice, InitSetup};
use super::{fit_fixed_b, fit_hkrr, mse, r2, HkrrFit, DEFAULT_MEDIAN_CAP};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::objective::{
    als_centers, leverage_scores, uniform_centers, HkrrProblem, HyperModel, SampleSet,
    DEFAULT_JITTER,
};
use crate::optim::{FitConfig, FitTrace, StopReason};

/// `(d, λ)` grid with geometrically spaced `λ_j = λ_1·Q^{j−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvGrid {
    pub d_values: Vec<usize>,
    pub lambda_1: f64,
    pub lambda_n: f64,
    pub n: usize,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            d_values: vec![1, 2, 3],
            lambda_1: 1e-8,
            lambda_n: 1e-2,
            n: 7,
        }
    }
}

impl CvGrid {
    pub fn validate(&self, ambient_dim: usize) -> Result<()> {
        if self.d_values.is_empty() {
            return Err(Error::invalid("grid needs at least one latent dimension"));
        }
        if self.d_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("latent dimensions must be strictly ascending"));
        }
        if self.d_values[0] == 0 || *self.d_values.last().unwrap() > ambient_dim {
            return Err(Error::invalid(format!(
                "latent dimensions must lie in 1..={ambient_dim}"
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.lambda_1) && positive(self.lambda_n)) {
            return Err(Error::invalid("grid lambdas must be positive"));
        }
        match self.n {
            0 => Err(Error::invalid("grid needs at least one lambda")),
            1 if self.lambda_1 != self.lambda_n => Err(Error::invalid(
                "a single-point lambda grid needs lambda_1 == lambda_n",
            )),
            _ => Ok(()),
        }
    }

    /// Ratio `Q = (λ_N/λ_1)^{1/(N−1)}`.
    pub fn ratio(&self) -> f64 {
        if self.n <= 1 {
            1.0
        } else {
            (self.lambda_n / self.lambda_1).powf(1.0 / (self.n - 1) as f64)
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let q = self.ratio();
        (0..self.n).map(|j| self.lambda_1 * q.powi(j as i32)).collect()
    }

    /// All cells ordered by `d`, then `λ`, ascending.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        let lambdas = self.lambdas();
        self.d_values
            .iter()
            .flat_map(|&d| lambdas.iter().map(move |&l| (d, l)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CenterStrategy {
    Uniform,
    /// Leverage-score sampling on the Gaussian kernel of the raw inputs, with
    /// the bandwidth set by the median heuristic.
    Als { t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub n_centers: usize,
    pub centers: CenterStrategy,
    pub n_candidates: usize,
    /// Regularization used while scoring initial candidates.
    pub lambda0: f64,
    /// Truncation bound; defaults to `max |y_train|`.
    pub trunc_m: Option<f64>,
    pub median_cap: usize,
    pub jitter: f64,
    /// When false, the selected initial map is kept fixed (plain Nyström KRR).
    pub optimize_b: bool,
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            n_centers: 50,
            centers: CenterStrategy::Uniform,
            n_candidates: 10,
            lambda0: 1e-7,
            trunc_m: None,
            median_cap: DEFAULT_MEDIAN_CAP,
            jitter: DEFAULT_JITTER,
            optimize_b: true,
            seed: 0,
        }
    }
}

impl CvSettings {
    pub fn select_centers(&self, train: &SampleSet) -> Result<Vec<usize>> {
        let n = self.n_centers.min(train.len());
        match self.centers {
            CenterStrategy::Uniform => uniform_centers(train.len(), n, self.seed),
            CenterStrategy::Als { t } => {
                let gamma = median_heuristic_mapped(train.x(), self.median_cap, self.seed)?;
                let k = KernelConfig::gaussian(gamma)?.gram(train.x());
                als_centers(&leverage_scores(&k, t)?, n, self.seed)
            }
        }
    }

    pub fn resolved_trunc_m(&self, train: &SampleSet) -> Option<f64> {
        self.trunc_m
            .or_else(|| Some(train.max_abs_y()).filter(|m| *m > 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub d: usize,
    pub lambda: f64,
    pub val_mse: Option<f64>,
    pub val_r2: Option<f64>,
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub final_loss: Option<f64>,
    pub stop: Option<StopReason>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub rows: Vec<CvRow>,
    /// Index into `rows` of the selected cell.
    pub selected: usize,
    pub model: HyperModel,
    pub trace: FitTrace,
    pub centers: Vec<usize>,
}

impl CvResult {
    pub fn selected_row(&self) -> &CvRow {
        &self.rows[self.selected]
    }
}

/// Index of the smallest finite validation error; ties go to the earliest row,
/// which is the smallest `d`, then the smallest `λ`, for grid-ordered rows.
pub fn argmin_row(rows: &[CvRow]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(v) = row.val_mse.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

struct CellOutcome {
    row: CvRow,
    fit: Option<HkrrFit>,
}

/// Hold-out cross-validation over the `(d, λ)` grid. Cells run in parallel on
/// the current rayon pool; the result does not depend on scheduling.
pub fn cross_validate(
    train: &SampleSet,
    val: &SampleSet,
    grid: &CvGrid,
    fit_cfg: &FitConfig,
    settings: &CvSettings,
) -> Result<CvResult> {
    grid.validate(train.dim())?;
    fit_cfg.validate()?;
    if val.dim() != train.dim() {
        return Err(Error::invalid("train and validation dimensions differ"));
    }
    let centers = settings.select_centers(train)?;
    let trunc_m = settings.resolved_trunc_m(train);

    let setup = InitSetup {
        train,
        val,
        centers: &centers,
        lambda0: settings.lambda0,
        median_cap: settings.median_cap,
        jitter: settings.jitter,
        seed: settings.seed,
    };
    let inits: BTreeMap<usize, std::result::Result<InitChoice, String>> = grid
        .d_values
        .par_iter()
        .map(|&d| {
            (
                d,
                init_candidates(&setup, d, settings.n_candidates).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let outcomes: Vec<CellOutcome> = grid
        .cells()
        .into_par_iter()
        .map(|(d, lambda)| run_cell(train, val, &centers, d, lambda, &inits[&d], fit_cfg, settings, trunc_m))
        .collect();

    let rows: Vec<CvRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let selected = argmin_row(&rows).ok_or(Error::AllCellsFailed(rows.len()))?;
    let fit = outcomes
        .into_iter()
        .nth(selected)
        .and_then(|o| o.fit)
        .expect("selected cell has a fit");
    Ok(CvResult {
        rows,
        selected,
        model: fit.model,
        trace: fit.trace,
        centers,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    train: &SampleSet,
    val: &SampleSet,
    centers: &[usize],
    d: usize,
    lambda: f64,
    init: &std::result::Result<InitChoice, String>,
    fit_cfg: &FitConfig,
    settings: &CvSettings,
    trunc_m: Option<f64>,
) -> CellOutcome {
    let mut row = CvRow {
        d,
        lambda,
        val_mse: None,
        val_r2: None,
        gamma: None,
        iterations: 0,
        final_loss: None,
        stop: None,
        error: None,
    };
    let init = match init {
        Ok(init) => init,
        Err(e) => {
            row.error = Some(e.clone());
            return CellOutcome { row, fit: None };
        }
    };
    row.gamma = Some(init.gamma);
    let attempt = || -> Result<(HkrrFit, f64, Option<f64>)> {
        let kernel = KernelConfig::gaussian(init.gamma)?;
        let problem = HkrrProblem::new(train, centers.to_vec(), kernel, lambda)?
            .with_jitter(settings.jitter);
        let fit = if settings.optimize_b {
            fit_hkrr(&problem, &init.b, fit_cfg, trunc_m)?
        } else {
            fit_fixed_b(&problem, &init.b, fit_cfg, trunc_m)?
        };
        let pred = fit.model.predict(val.x())?;
        let val_mse = mse(&pred, val.y())?;
        let val_r2 = r2(&pred, val.y()).ok();
        Ok((fit, val_mse, val_r2))
    };
    match attempt() {
        Ok((fit, val_mse, val_r2)) => {
            row.val_mse = Some(val_mse).filter(|v| v.is_finite());
            row.val_r2 = val_r2;
            row.iterations = fit.trace.iterations();
            row.final_loss = Some(fit.trace.final_loss());
            row.stop = Some(fit.trace.stop);
            if row.val_mse.is_none() {
                row.error = Some("non-finite validation error".to_owned());
            }
            CellOutcome {
                row,
                fit: Some(fit),
            }
        }
        Err(e) => {
            row.error = Some(e.to_string());
            CellOutcome { row, fit: None }
        }
    }
}
