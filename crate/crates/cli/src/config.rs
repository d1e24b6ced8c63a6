//! The run configuration document and its layering: built-in defaults (with
//! `HKRR_SEED` as the default seed), then a JSON config file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hkrr::modelsel::{CenterStrategy, CvGrid, CvSettings, DEFAULT_MEDIAN_CAP};
use hkrr::objective::DEFAULT_JITTER;
use hkrr::optim::FitConfig;
use hkrr::synthdata::{BMode, Dataset, GenSpec};
use hkrr::toy2d::{BasinRequest, ToyVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SEED_ENV: &str = "HKRR_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub gen: GenConfig,
    pub model: ModelConfig,
    pub fit: FitConfig,
    pub cv: CvGrid,
    pub toymap: ToymapConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gen: GenConfig::default(),
            model: ModelConfig::default(),
            fit: FitConfig::default(),
            cv: CvGrid::default(),
            toymap: ToymapConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub dataset: Dataset,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub m: usize,
    pub noise_ratio: f64,
    /// Fixed true map as rows; drawn at random when absent.
    pub b_true: Option<Vec<Vec<f64>>>,
    /// Train/validation/test fractions; no split files are written when absent.
    pub split: Option<(f64, f64, f64)>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::Ds1,
            ambient_dim: 20,
            latent_dim: 2,
            m: 1000,
            noise_ratio: 0.01,
            b_true: None,
            split: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Latent dimension for `fit`.
    pub d: usize,
    /// Regularization for `fit`.
    pub lambda: f64,
    pub n_centers: usize,
    pub centers: CenterStrategy,
    pub n_candidates: usize,
    pub lambda0: f64,
    pub trunc_m: Option<f64>,
    pub median_cap: usize,
    pub jitter: f64,
    pub optimize_b: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = CvSettings::default();
        Self {
            d: 2,
            lambda: 1e-6,
            n_centers: s.n_centers,
            centers: s.centers,
            n_candidates: s.n_candidates,
            lambda0: s.lambda0,
            trunc_m: s.trunc_m,
            median_cap: DEFAULT_MEDIAN_CAP,
            jitter: DEFAULT_JITTER,
            optimize_b: s.optimize_b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToymapConfig {
    pub variant: ToyVariant,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
    pub tol: f64,
    /// Starting points `(x, y)` whose VarPro and AGD paths are written out.
    pub trajectories: Vec<(f64, f64)>,
}

impl Default for ToymapConfig {
    fn default() -> Self {
        let r = BasinRequest::default();
        Self {
            variant: r.variant,
            x_range: r.x_range,
            y_range: r.y_range,
            resolution: r.resolution,
            tol: r.tol,
            trajectories: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            train: None,
            val: None,
            test: None,
            model: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Defaults, with the seed taken from `HKRR_SEED` when set.
    pub fn defaults_from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(raw) = std::env::var(SEED_ENV) {
            cfg.seed = raw
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer"))?;
        }
        Ok(cfg)
    }

    /// Layers an optional config file over the environment defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let base = Self::defaults_from_env()?;
        match path {
            None => Ok(base),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                let overlay: Value = serde_json::from_str(&text)
                    .with_context(|| format!("config {} is not valid JSON", path.display()))?;
                base.overlay(overlay)
                    .with_context(|| format!("invalid config {}", path.display()))
            }
        }
    }

    /// Deep-merges `overlay` into this document; objects merge key by key, any
    /// other value replaces the current one.
    pub fn overlay(&self, overlay: Value) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        merge(&mut doc, overlay);
        Ok(serde_json::from_value(doc)?)
    }

    pub fn gen_spec(&self) -> Result<GenSpec> {
        let g = &self.gen;
        let mut spec = GenSpec::new(g.dataset, g.ambient_dim, g.latent_dim, g.m, self.seed);
        spec.noise_ratio = g.noise_ratio;
        if let Some(rows) = &g.b_true {
            spec.b_mode = BMode::Manual(
                hkrr::from_rows(rows, g.ambient_dim).map_err(anyhow::Error::msg)?,
            );
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn cv_settings(&self) -> CvSettings {
        let m = &self.model;
        CvSettings {
            n_centers: m.n_centers,
            centers: m.centers,
            n_candidates: m.n_candidates,
            lambda0: m.lambda0,
            trunc_m: m.trunc_m,
            median_cap: m.median_cap,
            jitter: m.jitter,
            optimize_b: m.optimize_b,
            seed: self.seed,
        }
    }

    pub fn basin_request(&self) -> BasinRequest {
        let t = &self.toymap;
        BasinRequest {
            variant: t.variant,
            x_range: t.x_range,
            y_range: t.y_range,
            resolution: t.resolution,
            tol: t.tol,
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(base), Value::Object(overlay)) => {
            for (key, value) in overlay {
                match base.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
