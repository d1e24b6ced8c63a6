//! Command-line flags. Every flag is optional and, when given, overrides the
//! corresponding value of the resolved [`RunConfig`].

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hkrr::modelsel::CenterStrategy;
use hkrr::optim::{Algorithm, AlphaStep};
use hkrr::synthdata::Dataset;
use hkrr::toy2d::ToyVariant;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "hkrr", version, about = "Hyper-kernel ridge regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-index dataset.
    Gen(GenArgs),
    /// Fit one HKRR model at fixed (d, lambda).
    Fit(FitArgs),
    /// Hold-out cross-validation over a (d, lambda) grid.
    Cv(CvArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Convergence map of VarPro and AGD on a toy landscape.
    Toymap(ToymapArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config document; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.paths.out, self.out.clone());
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_from_str::<Dataset>)]
    pub dataset: Option<Dataset>,
    /// Ambient dimension.
    #[arg(long = "D")]
    pub ambient_dim: Option<usize>,
    /// Latent dimension of the true map.
    #[arg(long = "d-star")]
    pub latent_dim: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub noise_ratio: Option<f64>,
    /// Train/validation/test fractions, e.g. 0.5,0.25,0.25.
    #[arg(long, value_parser = parse_triple)]
    pub split: Option<(f64, f64, f64)>,
}

impl GenArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        let g = &mut cfg.gen;
        set(&mut g.dataset, self.dataset);
        set(&mut g.ambient_dim, self.ambient_dim);
        set(&mut g.latent_dim, self.latent_dim);
        set(&mut g.m, self.m);
        set(&mut g.noise_ratio, self.noise_ratio);
        if self.split.is_some() {
            g.split = self.split;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub n_centers: Option<usize>,
    /// `uniform` or `als`.
    #[arg(long)]
    pub centers: Option<String>,
    /// ALS regularization parameter.
    #[arg(long, default_value_t = 1e-3)]
    pub als_t: f64,
    #[arg(long)]
    pub n_candidates: Option<usize>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Output clipping bound; defaults to max |y| on the training set.
    #[arg(long)]
    pub trunc_m: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    #[arg(long, value_parser = parse_from_str::<Algorithm>)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub n_alpha: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub time_budget_ms: Option<u64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// `linesearch` or `lipschitz`.
    #[arg(long)]
    pub alpha_step: Option<String>,
}

impl ModelFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let m = &mut cfg.model;
        set(&mut m.n_centers, self.n_centers);
        set(&mut m.n_candidates, self.n_candidates);
        set(&mut m.lambda0, self.lambda0);
        set(&mut m.jitter, self.jitter);
        if self.trunc_m.is_some() {
            m.trunc_m = self.trunc_m;
        }
        match self.centers.as_deref() {
            None => {}
            Some("uniform") => m.centers = CenterStrategy::Uniform,
            Some("als") => m.centers = CenterStrategy::Als { t: self.als_t },
            Some(other) => bail!("unknown center strategy {other:?} (expected uniform or als)"),
        }
        Ok(())
    }
}

impl FitFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let f = &mut cfg.fit;
        set(&mut f.algorithm, self.algorithm);
        set(&mut f.n_alpha, self.n_alpha);
        set(&mut f.max_iter, self.max_iter);
        set(&mut f.grad_tol, self.grad_tol);
        if self.time_budget_ms.is_some() {
            f.time_budget_ms = self.time_budget_ms;
        }
        match self.alpha_step.as_deref() {
            None => {}
            Some("linesearch") => f.alpha_step = AlphaStep::Linesearch,
            Some("lipschitz") => f.alpha_step = AlphaStep::Lipschitz,
            Some(other) => bail!("unknown alpha step {other:?} (expected linesearch or lipschitz)"),
        }
        Ok(())
    }

    /// Flags that have no effect under the resolved algorithm.
    pub fn warnings(&self, cfg: &RunConfig) -> Vec<String> {
        let mut out = Vec::new();
        if cfg.fit.algorithm == Algorithm::Varpro {
            if self.n_alpha.is_some() {
                out.push("--n-alpha is ignored by varpro".to_owned());
            }
            if self.alpha_step.is_some() {
                out.push("--alpha-step is ignored by varpro".to_owned());
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation set for scoring initial maps; the training set is used when absent.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Latent dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub fit: FitFlags,
}

impl FitArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        set_path(&mut cfg.paths.train, &self.train);
        set_path(&mut cfg.paths.val, &self.val);
        set(&mut cfg.model.d, self.d);
        set(&mut cfg.model.lambda, self.lambda);
        self.model.apply(&mut cfg)?;
        self.fit.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Latent dimensions, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<usize>>,
    #[arg(long = "lambda-1")]
    pub lambda_1: Option<f64>,
    #[arg(long)]
    pub lambda_n: Option<f64>,
    /// Number of lambda grid points.
    #[arg(long)]
    pub n_lambda: Option<usize>,
    /// Keep the selected initial map fixed (plain Nystrom KRR).
    #[arg(long)]
    pub fixed_b: bool,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub fit: FitFlags,
}

impl CvArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        set_path(&mut cfg.paths.train, &self.train);
        set_path(&mut cfg.paths.val, &self.val);
        set(&mut cfg.cv.d_values, self.d_values.clone());
        set(&mut cfg.cv.lambda_1, self.lambda_1);
        set(&mut cfg.cv.lambda_n, self.lambda_n);
        set(&mut cfg.cv.n, self.n_lambda);
        if self.fixed_b {
            cfg.model.optimize_b = false;
        }
        self.model.apply(&mut cfg)?;
        self.fit.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
}

impl EvalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        set_path(&mut cfg.paths.model, &self.model);
        set_path(&mut cfg.paths.test, &self.test);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ToymapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_from_str::<ToyVariant>)]
    pub variant: Option<ToyVariant>,
    /// e.g. -3,3
    #[arg(long, value_parser = parse_pair::<f64>, allow_hyphen_values = true)]
    pub x_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair::<f64>, allow_hyphen_values = true)]
    pub y_range: Option<(f64, f64)>,
    /// Grid points per axis: `n` or `nx,ny`.
    #[arg(long, value_parser = parse_resolution)]
    pub resolution: Option<(usize, usize)>,
    /// A run counts as converged when its final value is at most this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Starting point `x,y` whose paths are written out; repeatable.
    #[arg(long, value_parser = parse_pair::<f64>, allow_hyphen_values = true)]
    pub trajectory: Vec<(f64, f64)>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub fit: FitFlags,
}

impl ToymapArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        let t = &mut cfg.toymap;
        set(&mut t.variant, self.variant);
        set(&mut t.x_range, self.x_range);
        set(&mut t.y_range, self.y_range);
        set(&mut t.resolution, self.resolution);
        set(&mut t.tol, self.tol);
        if !self.trajectory.is_empty() {
            t.trajectories = self.trajectory.clone();
        }
        self.fit.apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn parse_from_str<T>(s: &str) -> std::result::Result<T, String>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .with_context(|| format!("cannot parse {part:?} in {s:?}"))
        })
        .collect()
}

fn parse_pair<T>(s: &str) -> std::result::Result<(T, T), String>
where
    T: FromStr + Copy,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    match parse_list::<T>(s).map_err(|e| e.to_string())?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(format!("expected two comma-separated values, got {s:?}")),
    }
}

fn parse_triple(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    match parse_list::<f64>(s).map_err(|e| e.to_string())?[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three comma-separated values, got {s:?}")),
    }
}

fn parse_resolution(s: &str) -> std::result::Result<(usize, usize), String> {
    match parse_list::<usize>(s).map_err(|e| e.to_string())?[..] {
        [n] => Ok((n, n)),
        [nx, ny] => Ok((nx, ny)),
        _ => Err(format!("expected n or nx,ny, got {s:?}")),
    }
}
