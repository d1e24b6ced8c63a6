use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::objective::{HkrrProblem, SampleSet};
use crate::optim::project_spectral_ball;
use crate::rng::{stream, streams};

use super::mse;

/// Default cap on the rows used by [`median_heuristic`].
pub const DEFAULT_MEDIAN_CAP: usize = 1000;

/// Clamp to `[−M, M]`.
pub fn truncate(value: f64, bound: f64) -> f64 {
    value.clamp(-bound, bound)
}

/// Bandwidth `γ = 1/(2μ²)` with `μ` the median pairwise distance of the mapped
/// points `Bx_i`. At most `cap` rows, drawn uniformly with `seed`, are used.
pub fn median_heuristic(data: &SampleSet, b: &DMatrix<f64>, cap: usize, seed: u64) -> Result<f64> {
    let mapped = data.mapped(b)?;
    median_heuristic_mapped(&mapped, cap, seed)
}

pub fn median_heuristic_mapped(mapped: &DMatrix<f64>, cap: usize, seed: u64) -> Result<f64> {
    let m = mapped.nrows();
    if m < 2 || cap < 2 {
        return Err(Error::DegenerateData(
            "median heuristic needs at least two points".to_owned(),
        ));
    }
    let rows: Vec<usize> = if m > cap {
        let mut rng = stream(seed, streams::MEDIAN_SUBSAMPLE);
        rand::seq::index::sample(&mut rng, m, cap).into_vec()
    } else {
        (0..m).collect()
    };
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            dists.push(crate::kernel::row_sq_dist(mapped, i, mapped, j).sqrt());
        }
    }
    let median = median(&mut dists);
    if !(median > 0.0) {
        return Err(Error::DegenerateData(
            "median pairwise distance of the mapped points is zero".to_owned(),
        ));
    }
    Ok(1.0 / (2.0 * median * median))
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Shared inputs for scoring candidate initial maps.
#[derive(Clone, Debug)]
pub struct InitSetup<'a> {
    pub train: &'a SampleSet,
    pub val: &'a SampleSet,
    pub centers: &'a [usize],
    pub lambda0: f64,
    pub median_cap: usize,
    pub jitter: f64,
    pub seed: u64,
}

/// The selected initial map and its bandwidth.
#[derive(Clone, Debug)]
pub struct InitChoice {
    pub b: DMatrix<f64>,
    pub gamma: f64,
    pub val_mse: f64,
    pub candidate: usize,
    /// Validation MSE per candidate; `None` where the candidate failed.
    pub scores: Vec<Option<f64>>,
}

/// Draws `n_candidates` maps with i.i.d. `U[0,1]` entries, projects each onto
/// the spectral ball, and keeps the one with the lowest validation error.
pub fn init_candidates(setup: &InitSetup<'_>, d: usize, n_candidates: usize) -> Result<InitChoice> {
    if n_candidates == 0 {
        return Err(Error::invalid("at least one initial candidate is required"));
    }
    let dim = setup.train.dim();
    if d == 0 || d > dim {
        return Err(Error::invalid(format!("latent dimension {d} not in 1..={dim}")));
    }
    let mut rng = stream(setup.seed, streams::INIT_CANDIDATES + d as u64);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let candidates = (0..n_candidates)
        .map(|_| {
            let raw = DMatrix::from_fn(d, dim, |_, _| unit.sample(&mut rng));
            project_spectral_ball(&raw)
        })
        .collect::<Result<Vec<_>>>()?;
    select_initialization(setup, candidates)
}

/// Scores explicit candidate maps; the first candidate with minimal validation
/// MSE wins.
pub fn select_initialization(
    setup: &InitSetup<'_>,
    candidates: Vec<DMatrix<f64>>,
) -> Result<InitChoice> {
    let mut best: Option<InitChoice> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut last_err = None;
    for (idx, b) in candidates.into_iter().enumerate() {
        match score_candidate(setup, &b) {
            Ok((gamma, val_mse)) => {
                scores.push(Some(val_mse));
                if best.as_ref().is_none_or(|c| val_mse < c.val_mse) {
                    best = Some(InitChoice {
                        b,
                        gamma,
                        val_mse,
                        candidate: idx,
                        scores: Vec::new(),
                    });
                }
            }
            Err(e) => {
                scores.push(None);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(mut choice) => {
            choice.scores = scores;
            Ok(choice)
        }
        None => Err(last_err.unwrap_or_else(|| Error::invalid("no initial candidates"))),
    }
}

fn score_candidate(setup: &InitSetup<'_>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
    let gamma = median_heuristic(setup.train, b, setup.median_cap, setup.seed)?;
    let kernel = KernelConfig::gaussian(gamma)?;
    let problem = HkrrProblem::new(setup.train, setup.centers.to_vec(), kernel, setup.lambda0)?
        .with_jitter(setup.jitter);
    let alpha = problem.solve_alpha(b)?.alpha;
    let model = problem.to_model(b.clone(), alpha, None)?;
    let pred = model.predict_raw(setup.val.x())?;
    let score = mse(&pred, setup.val.y())?;
    if !score.is_finite() {
        return Err(Error::Numeric("non-finite validation error".to_owned()));
    }
    Ok((gamma, score))
}
