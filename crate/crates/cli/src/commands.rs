use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use hkrr::kernel::KernelConfig;
use hkrr::modelsel::{
    self, cross_validate, fit_fixed_b, fit_hkrr, init_candidates, CvRow, HkrrFit, InitSetup,
};
use hkrr::objective::{HkrrProblem, HyperModel, SampleSet};
use hkrr::optim::{
    agd_fit_observed, varpro_fit_observed, Algorithm, FitConfig, FitTrace, StopReason,
};
use hkrr::synthdata::{self, read_csv, write_csv};
use hkrr::toy2d::{basin_map, BasinCode, BasinRequest, ToyObjective, ToyVariant, BASIN_MAX_ITER};
use nalgebra::DVector;
use serde::Serialize;

use crate::args::{CvArgs, EvalArgs, FitArgs, GenArgs, ToymapArgs};
use crate::config::RunConfig;
use crate::output::{ensure_dir, print_paths, read_json, write_csv_with_header, write_json};

/// Slack per inequality when replaying optimizer traces.
pub const LEDGER_SLACK: f64 = 1e-8;

pub const TRACE_HEADER: [&str; 14] = [
    "iter",
    "loss",
    "loss_before",
    "loss_after_u",
    "grad_u_norm",
    "grad_v_norm",
    "s_u",
    "s_v",
    "armijo_trials_u",
    "armijo_trials_v",
    "n_v_steps",
    "jitter_used",
    "constraint",
    "conditioning_bound",
];

#[derive(Serialize)]
struct TraceCsvRow {
    iter: usize,
    loss: f64,
    loss_before: f64,
    loss_after_u: f64,
    grad_u_norm: f64,
    grad_v_norm: f64,
    s_u: f64,
    s_v: f64,
    armijo_trials_u: usize,
    armijo_trials_v: usize,
    n_v_steps: usize,
    jitter_used: bool,
    constraint: Option<f64>,
    conditioning_bound: Option<f64>,
}

fn write_trace(path: &Path, trace: &FitTrace) -> Result<PathBuf> {
    let rows = trace.rows.iter().map(|r| TraceCsvRow {
        iter: r.iter,
        loss: r.loss,
        loss_before: r.loss_before,
        loss_after_u: r.loss_after_u,
        grad_u_norm: r.grad_u_norm,
        grad_v_norm: r.grad_v_norm,
        s_u: r.s_u,
        s_v: r.s_v,
        armijo_trials_u: r.armijo_trials_u,
        armijo_trials_v: r.armijo_trials_v,
        n_v_steps: r.v_steps.len(),
        jitter_used: r.jitter_used,
        constraint: r.constraint,
        conditioning_bound: r.conditioning_bound,
    });
    write_csv_with_header(path, &TRACE_HEADER, rows)
}

#[derive(Serialize)]
struct Timing {
    total_ms: f64,
    compute_ms: f64,
}

fn write_timing(out: &Path, total: &Instant, compute_ms: f64) -> Result<PathBuf> {
    let timing = Timing {
        total_ms: total.elapsed().as_secs_f64() * 1e3,
        compute_ms,
    };
    write_json(&out.join("timing.json"), &timing)
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| anyhow!("missing input: pass {flag} or set it in the config paths"))
}

fn load_samples(path: &Path) -> Result<SampleSet> {
    read_csv(path).with_context(|| format!("cannot load dataset {}", path.display()))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(f))
}

#[derive(Serialize)]
struct GenMeta<'a> {
    spec: &'a synthdata::GenSpec,
    b_true: Vec<Vec<f64>>,
    m: usize,
    ambient_dim: usize,
    files: Vec<PathBuf>,
    config: &'a RunConfig,
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let spec = cfg.gen_spec()?;
    let generated = synthdata::generate(&spec)?;
    let out = &cfg.paths.out;
    ensure_dir(out)?;
    let mut files = vec![out.join("data.csv")];
    write_csv(&generated.data, &files[0])?;
    if let Some(fractions) = cfg.gen.split {
        let (train, val, test) = synthdata::split(&generated.data, fractions, cfg.seed)?;
        for (name, part) in [("train.csv", &train), ("val.csv", &val), ("test.csv", &test)] {
            let path = out.join(name);
            write_csv(part, &path)?;
            files.push(path);
        }
    }
    let meta = GenMeta {
        spec: &spec,
        b_true: hkrr::to_rows(&generated.b_true),
        m: generated.data.len(),
        ambient_dim: generated.data.dim(),
        files: files.clone(),
        config: &cfg,
    };
    files.push(write_json(&out.join("meta.json"), &meta)?);
    print_paths(&files);
    Ok(())
}

/// Initial map selection followed by the configured optimizer at one `(d, λ)`.
pub struct FitOutcome {
    pub fit: HkrrFit,
    pub gamma: f64,
    pub init_candidate: usize,
    pub init_val_mse: f64,
}

pub fn fit_one(train: &SampleSet, val: &SampleSet, cfg: &RunConfig) -> Result<FitOutcome> {
    let settings = cfg.cv_settings();
    let centers = settings.select_centers(train)?;
    let setup = InitSetup {
        train,
        val,
        centers: &centers,
        lambda0: settings.lambda0,
        median_cap: settings.median_cap,
        jitter: settings.jitter,
        seed: settings.seed,
    };
    let init = init_candidates(&setup, cfg.model.d, settings.n_candidates)?;
    let kernel = KernelConfig::gaussian(init.gamma)?;
    let problem = HkrrProblem::new(train, centers, kernel, cfg.model.lambda)?
        .with_jitter(settings.jitter);
    let trunc_m = settings.resolved_trunc_m(train);
    let fit = if settings.optimize_b {
        fit_hkrr(&problem, &init.b, &cfg.fit, trunc_m)?
    } else {
        fit_fixed_b(&problem, &init.b, &cfg.fit, trunc_m)?
    };
    Ok(FitOutcome {
        fit,
        gamma: init.gamma,
        init_candidate: init.candidate,
        init_val_mse: init.val_mse,
    })
}

#[derive(Serialize)]
struct FitSummary {
    algorithm: Algorithm,
    optimize_b: bool,
    d: usize,
    lambda: f64,
    gamma: f64,
    n_centers: usize,
    trunc_m: Option<f64>,
    init_candidate: usize,
    init_val_mse: f64,
    initial_loss: f64,
    final_loss: f64,
    iterations: usize,
    stop: StopReason,
    stalled_linesearch: bool,
    jitter_used: bool,
    final_grad_u_norm: Option<f64>,
    final_constraint: Option<f64>,
    train_mse: f64,
    train_r2: Option<f64>,
    ledger_checks: usize,
    ledger_violations: Vec<String>,
    time_budget_ms: Option<u64>,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    for warning in args.fit.warnings(&cfg) {
        eprintln!("warning: {warning}");
    }
    cfg.fit.validate()?;
    let train = load_samples(required(&cfg.paths.train, "--train")?)?;
    let val = cfg.paths.val.as_deref().map(load_samples).transpose()?;
    let out = &cfg.paths.out;
    ensure_dir(out)?;

    let compute = Instant::now();
    let outcome = fit_one(&train, val.as_ref().unwrap_or(&train), &cfg)?;
    let compute_ms = compute.elapsed().as_secs_f64() * 1e3;

    let HkrrFit { model, trace } = &outcome.fit;
    let pred = model.predict(train.x())?;
    let ledger = trace.verify_ledger(LEDGER_SLACK);
    let summary = FitSummary {
        algorithm: trace.algorithm,
        optimize_b: cfg.model.optimize_b,
        d: model.latent_dim(),
        lambda: model.lambda,
        gamma: outcome.gamma,
        n_centers: model.centers.len(),
        trunc_m: model.trunc_m,
        init_candidate: outcome.init_candidate,
        init_val_mse: outcome.init_val_mse,
        initial_loss: trace.initial_loss,
        final_loss: trace.final_loss(),
        iterations: trace.iterations(),
        stop: trace.stop,
        stalled_linesearch: trace.stop == StopReason::StalledLinesearch,
        jitter_used: trace.jitter_used,
        final_grad_u_norm: trace.rows.last().map(|r| r.grad_u_norm),
        final_constraint: trace.rows.last().and_then(|r| r.constraint),
        train_mse: modelsel::mse(&pred, train.y())?,
        train_r2: modelsel::r2(&pred, train.y()).ok(),
        ledger_checks: ledger.checks,
        ledger_violations: ledger.violations,
        time_budget_ms: cfg.fit.time_budget_ms,
    };
    let files = vec![
        write_json(&out.join("model.json"), model)?,
        write_trace(&out.join("trace.csv"), trace)?,
        write_json(&out.join("summary.json"), &summary)?,
        write_json(&out.join("config.json"), &cfg)?,
        write_timing(out, &started, compute_ms)?,
    ];
    print_paths(&files);
    Ok(())
}

pub const CV_HEADER: [&str; 9] = [
    "d",
    "lambda",
    "val_mse",
    "val_r2",
    "gamma",
    "iterations",
    "final_loss",
    "stop",
    "error",
];

#[derive(Serialize)]
struct CvSummary<'a> {
    selected: usize,
    row: &'a CvRow,
    n_rows: usize,
    n_failed: usize,
    n_centers: usize,
    trunc_m: Option<f64>,
}

pub fn cv(args: &CvArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    for warning in args.fit.warnings(&cfg) {
        eprintln!("warning: {warning}");
    }
    let train = load_samples(required(&cfg.paths.train, "--train")?)?;
    let val = load_samples(required(&cfg.paths.val, "--val")?)?;
    let out = &cfg.paths.out;
    ensure_dir(out)?;

    let compute = Instant::now();
    let settings = cfg.cv_settings();
    let result =
        with_pool(args.jobs, || cross_validate(&train, &val, &cfg.cv, &cfg.fit, &settings))??;
    let compute_ms = compute.elapsed().as_secs_f64() * 1e3;

    let summary = CvSummary {
        selected: result.selected,
        row: result.selected_row(),
        n_rows: result.rows.len(),
        n_failed: result.rows.iter().filter(|r| r.val_mse.is_none()).count(),
        n_centers: result.centers.len(),
        trunc_m: result.model.trunc_m,
    };
    let files = vec![
        write_csv_with_header(&out.join("cv_table.csv"), &CV_HEADER, result.rows.iter())?,
        write_json(&out.join("model.json"), &result.model)?,
        write_trace(&out.join("trace.csv"), &result.trace)?,
        write_json(&out.join("cv_summary.json"), &summary)?,
        write_json(&out.join("config.json"), &cfg)?,
        write_timing(out, &started, compute_ms)?,
    ];
    print_paths(&files);
    Ok(())
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub mse: f64,
    pub r2: f64,
    pub m_test: usize,
}

pub fn evaluate(model: &HyperModel, test: &SampleSet) -> Result<EvalReport> {
    model.validate()?;
    let pred = model.predict(test.x())?;
    Ok(EvalReport {
        mse: modelsel::mse(&pred, test.y())?,
        r2: modelsel::r2(&pred, test.y())?,
        m_test: test.len(),
    })
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let model: HyperModel = read_json(required(&cfg.paths.model, "--model")?)?;
    let test = load_samples(required(&cfg.paths.test, "--test")?)?;
    let report = evaluate(&model, &test)?;
    let out = &cfg.paths.out;
    ensure_dir(out)?;
    write_json(&out.join("eval.json"), &report)?;
    write_json(&out.join("config.json"), &cfg)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct BasinCsvRow {
    x0: f64,
    y0: f64,
    code: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub x: f64,
    pub y: f64,
    pub f: f64,
}

#[derive(Serialize)]
struct TrajectorySummary {
    x0: f64,
    y0: f64,
    algorithm: Algorithm,
    file: PathBuf,
    iterations: usize,
    final_f: f64,
    stop: StopReason,
}

#[derive(Serialize)]
struct BasinHeader<'a> {
    request: &'a BasinRequest,
    fit: &'a FitConfig,
    n_cells: usize,
    counts: BTreeMap<&'static str, usize>,
    fractions: BTreeMap<&'static str, f64>,
    trajectories: Vec<TrajectorySummary>,
}

/// Fit config used for every toy run: the resolved config with the
/// iteration cap shared by the basin map.
pub fn toy_fit_config(cfg: &RunConfig) -> FitConfig {
    let mut fit = cfg.fit.clone();
    fit.max_iter = fit.max_iter.min(BASIN_MAX_ITER);
    fit
}

/// Runs `algorithm` from `(x0, y0)` and records every iterate.
pub fn toy_trajectory(
    variant: ToyVariant,
    algorithm: Algorithm,
    x0: f64,
    y0: f64,
    fit_cfg: &FitConfig,
) -> Result<(Vec<TrajectoryPoint>, FitTrace)> {
    let obj = ToyObjective::new(variant);
    let cfg = fit_cfg.clone().with_algorithm(algorithm);
    let u0 = DVector::from_element(1, y0);
    let v0 = DVector::from_element(1, x0);
    let mut points = Vec::new();
    let mut observe = |iter: usize, u: &DVector<f64>, v: &DVector<f64>| {
        points.push(TrajectoryPoint {
            iter,
            x: v[0],
            y: u[0],
            f: variant.eval(v[0], u[0]),
        });
    };
    let result = match algorithm {
        Algorithm::Varpro => varpro_fit_observed(&obj, &u0, &cfg, &mut observe)?,
        Algorithm::Agd => agd_fit_observed(&obj, &u0, &v0, &cfg, &mut observe)?,
    };
    Ok((points, result.trace))
}

pub fn toymap(args: &ToymapArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    let request = cfg.basin_request();
    request.validate()?;
    let fit_cfg = toy_fit_config(&cfg);
    let out = &cfg.paths.out;
    ensure_dir(out)?;

    let compute = Instant::now();
    let map = with_pool(args.jobs, || basin_map(&request, &fit_cfg))??;

    let mut files = Vec::new();
    let mut trajectories = Vec::new();
    for (i, &(x0, y0)) in cfg.toymap.trajectories.iter().enumerate() {
        for algorithm in [Algorithm::Varpro, Algorithm::Agd] {
            let (points, trace) = toy_trajectory(request.variant, algorithm, x0, y0, &fit_cfg)?;
            let path = out.join(format!("trajectory_{i}_{algorithm}.csv"));
            write_csv_with_header(&path, &["iter", "x", "y", "f"], points.iter())?;
            trajectories.push(TrajectorySummary {
                x0,
                y0,
                algorithm,
                file: path.clone(),
                iterations: trace.iterations(),
                final_f: points.last().map_or(f64::NAN, |p| p.f),
                stop: trace.stop,
            });
            files.push(path);
        }
    }
    let compute_ms = compute.elapsed().as_secs_f64() * 1e3;

    let codes = [
        BasinCode::Both,
        BasinCode::VarproOnly,
        BasinCode::AgdOnly,
        BasinCode::Neither,
    ];
    let header = BasinHeader {
        request: &request,
        fit: &fit_cfg,
        n_cells: map.cells.len(),
        counts: codes
            .iter()
            .map(|&c| (c.as_str(), map.cells.iter().filter(|cell| cell.code == c).count()))
            .collect(),
        fractions: codes.iter().map(|&c| (c.as_str(), map.fraction(c))).collect(),
        trajectories,
    };
    let rows = map.cells.iter().map(|c| BasinCsvRow {
        x0: c.x0,
        y0: c.y0,
        code: c.code.as_str(),
    });
    files.insert(0, write_csv_with_header(&out.join("basin_map.csv"), &["x0", "y0", "code"], rows)?);
    files.insert(1, write_json(&out.join("basin_map.json"), &header)?);
    files.push(write_json(&out.join("config.json"), &cfg)?);
    files.push(write_timing(out, &started, compute_ms)?);
    print_paths(&files);
    Ok(())
}
