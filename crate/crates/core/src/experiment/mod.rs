//! Monte-Carlo sweeps over `T` and over the noise level, with per-run
//! hyperparameter selection and CSV output.
//!
//! Every run is identified by `(T, γ, run index)`; its seed is derived from the
//! base seed and those coordinates only, so adding grid cells never changes
//! existing rows and the output does not depend on the thread count.

mod config;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Model, Selection, StRule};

use crate::estimators::{self, Method};
use crate::metrics::{self, rmse};
use crate::rng::derive_seed;
use crate::selection::{self, build_beta_grid, data_fidelity, SelectionRule};
use crate::signal::{smoothness_of, MeasurementStack, StackedSignal};
use crate::synthgen::{self, AgnParams, GroundTruthSpec, OutliersParams};
use crate::{Error, Result};

/// One estimator on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub t: usize,
    pub gamma: f64,
    pub estimator: String,
    pub run: usize,
    pub seed: u64,
    pub beta: Option<f64>,
    pub tau: Option<usize>,
    pub lambda: Option<f64>,
    pub rmse: Option<f64>,
    pub status: String,
    pub wall_ms: f64,
}

/// Seed-estimator vs projected-power comparison on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmRecord {
    pub t: usize,
    pub gamma: f64,
    pub init: Method,
    pub run: usize,
    pub seed: u64,
    pub rmse_seed: Option<f64>,
    pub rmse_ppm: Option<f64>,
    pub status: String,
}

/// Seed of run `run` in cell `(T, γ)`.
pub fn run_seed(base: u64, t: usize, gamma: f64, run: usize) -> u64 {
    derive_seed(base, &[t as u64, gamma.to_bits(), run as u64])
}

/// Truth and measurements for one run.
pub fn generate_instance(cfg: &ExperimentConfig, t: usize, gamma: f64, seed: u64) -> Result<(StackedSignal, MeasurementStack)> {
    let truth = synthgen::generate_smooth_truth(&GroundTruthSpec { n: cfg.n, t, s_target: cfg.st.eval(t), seed })?;
    let a = match cfg.model {
        Model::Agn => synthgen::generate_agn(&truth, &AgnParams::new(cfg.n, t, gamma)?, seed)?,
        Model::Outliers => synthgen::generate_outliers(&truth, &OutliersParams::constant(cfg.n, t, gamma, cfg.p)?, seed)?,
    };
    Ok((truth, a))
}

/// Estimate with its selected hyperparameters.
#[derive(Debug, Clone)]
pub struct Selected {
    pub estimate: StackedSignal,
    pub beta: Option<f64>,
    pub tau: Option<usize>,
    pub lambda: Option<f64>,
}

impl Selected {
    fn plain(estimate: StackedSignal) -> Self {
        Self { estimate, beta: None, tau: None, lambda: None }
    }
}

fn oracle_tau(cfg: &ExperimentConfig, truth: &StackedSignal, gamma: f64) -> usize {
    let (n, t) = (truth.n(), truth.t());
    let s = smoothness_of(truth);
    match cfg.model {
        Model::Agn => metrics::tau_star_agn(n, t, s, gamma),
        Model::Outliers => {
            let params = OutliersParams::constant(n, t, gamma, cfg.p).expect("validated noise level");
            let stats = synthgen::outlier_noise_stats(&params);
            metrics::tau_star_outliers(n, t, s, &stats, cfg.mu, cfg.delta)
        }
    }
}

/// Runs `method` on `a` with the configured selection mode. `truth` is only
/// consulted by the oracle mode.
pub fn select_and_estimate(
    cfg: &ExperimentConfig,
    a: &MeasurementStack,
    truth: &StackedSignal,
    gamma: f64,
    method: Method,
) -> Result<Selected> {
    let t = a.t();
    match (method, cfg.selection) {
        (Method::NaiveSpectral, _) => Ok(Selected::plain(estimators::estimate_naive_spectral(a)?)),
        (Method::Ppm, _) => Err(Error::InvalidArgument("ppm needs an init estimator".into())),
        (m, Selection::FixedTau(k)) if m.uses_tau() => {
            let tau = k.min(t);
            let cfg_m = estimators::EstimatorConfig::new(m).with_tau(tau);
            Ok(Selected { estimate: estimators::estimate(a, &cfg_m)?, beta: None, tau: Some(tau), lambda: None })
        }
        (m, Selection::OracleTau) if m.uses_tau() => {
            let tau = oracle_tau(cfg, truth, gamma);
            let cfg_m = estimators::EstimatorConfig::new(m).with_tau(tau);
            Ok(Selected { estimate: estimators::estimate(a, &cfg_m)?, beta: None, tau: Some(tau), lambda: None })
        }
        (Method::Gtrs, Selection::FixedLambda(l)) => {
            Ok(Selected { estimate: estimators::estimate_gtrs(a, l)?, beta: None, tau: None, lambda: Some(l) })
        }
        (m, _) => {
            let grid = build_beta_grid(t);
            let (points, idx) = selection::select(a, m, &grid, cfg.lambda_scale, SelectionRule::for_method(m))?;
            let p = points.into_iter().nth(idx).expect("selected index is in range");
            Ok(Selected {
                estimate: p.estimate,
                beta: Some(p.beta),
                tau: m.uses_tau().then_some(p.tau),
                lambda: m.uses_lambda().then_some(p.lambda),
            })
        }
    }
}

/// Projected power iterations seeded by `init`, with `λ` fixed or picked by
/// largest fidelity over the grid.
pub fn ppm_from_seed(cfg: &ExperimentConfig, a: &MeasurementStack, init: &StackedSignal) -> Result<Selected> {
    if let Selection::FixedLambda(l) = cfg.selection {
        let g = estimators::estimate_ppm(a, l, cfg.ppm_iters, init)?;
        return Ok(Selected { estimate: g, beta: None, tau: None, lambda: Some(l) });
    }
    let grid = build_beta_grid(a.t());
    let mut best: Option<(f64, Selected)> = None;
    for &beta in grid.values() {
        let lambda = selection::beta_to_lambda(beta, cfg.lambda_scale);
        let g = estimators::estimate_ppm(a, lambda, cfg.ppm_iters, init)?;
        let f = data_fidelity(a, &g)?;
        if best.as_ref().map_or(true, |(bf, _)| f > *bf) {
            best = Some((f, Selected { estimate: g, beta: Some(beta), tau: None, lambda: Some(lambda) }));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

fn status_of(e: &Error) -> String {
    let kind = if e.is_numerical() { "numerical" } else { "error" };
    format!("{kind}: {}", e.to_string().replace([',', '\n'], ";"))
}

fn record_for(t: usize, gamma: f64, run: usize, seed: u64, name: String, truth: &StackedSignal, res: Result<Selected>, wall_ms: f64) -> RunRecord {
    let mut rec = RunRecord {
        t,
        gamma,
        estimator: name,
        run,
        seed,
        beta: None,
        tau: None,
        lambda: None,
        rmse: None,
        status: "ok".into(),
        wall_ms,
    };
    match res.and_then(|s| rmse(&s.estimate, truth).map(|r| (s, r))) {
        Ok((s, r)) => {
            rec.beta = s.beta;
            rec.tau = s.tau;
            rec.lambda = s.lambda;
            rec.rmse = Some(r);
        }
        Err(e) => rec.status = status_of(&e),
    }
    rec
}

fn run_cell(cfg: &ExperimentConfig, t: usize, gamma: f64, run: usize) -> Vec<RunRecord> {
    let seed = run_seed(cfg.seed, t, gamma, run);
    let (truth, a) = match generate_instance(cfg, t, gamma, seed) {
        Ok(x) => x,
        Err(e) => {
            return cfg
                .estimators
                .iter()
                .map(|m| RunRecord {
                    t,
                    gamma,
                    estimator: m.to_string(),
                    run,
                    seed,
                    beta: None,
                    tau: None,
                    lambda: None,
                    rmse: None,
                    status: status_of(&e),
                    wall_ms: 0.0,
                })
                .collect()
        }
    };
    let mut out = Vec::new();
    for &m in &cfg.estimators {
        if m == Method::Ppm {
            for &init in &cfg.ppm_inits {
                let start = Instant::now();
                let res = select_and_estimate(cfg, &a, &truth, gamma, init).and_then(|s| ppm_from_seed(cfg, &a, &s.estimate));
                let ms = start.elapsed().as_secs_f64() * 1e3;
                out.push(record_for(t, gamma, run, seed, format!("ppm:{init}"), &truth, res, ms));
            }
        } else {
            let start = Instant::now();
            let res = select_and_estimate(cfg, &a, &truth, gamma, m);
            let ms = start.elapsed().as_secs_f64() * 1e3;
            out.push(record_for(t, gamma, run, seed, m.to_string(), &truth, res, ms));
        }
    }
    out
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cells(cfg: &ExperimentConfig, ts: &[usize], gammas: &[f64]) -> Vec<(usize, f64, usize)> {
    let mut v = Vec::new();
    for &t in ts {
        for &g in gammas {
            for r in 0..cfg.runs {
                v.push((t, g, r));
            }
        }
    }
    v
}

fn run_records(cfg: &ExperimentConfig, ts: &[usize], gammas: &[f64]) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let tasks = cells(cfg, ts, gammas);
    with_pool(cfg.threads, || {
        tasks
            .par_iter()
            .map(|&(t, g, r)| run_cell(cfg, t, g, r))
            .collect::<Vec<_>>()
            .concat()
    })
}

/// Every `T` in the config, crossed with every noise level.
pub fn run_sweep_t(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_records(cfg, &cfg.t, cfg.noise_levels())
}

/// Every noise level at the first `T` of the config.
pub fn run_sweep_noise(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let t = *cfg.t.first().ok_or_else(|| Error::InvalidArgument("no T given".into()))?;
    run_records(cfg, &[t], cfg.noise_levels())
}

/// For every init in `ppm_inits`: RMSE of the selected seed estimate and of
/// the projected power method started from it, for every `(T, γ)` cell.
pub fn run_ppm_experiment(cfg: &ExperimentConfig) -> Result<Vec<PpmRecord>> {
    cfg.validate()?;
    if cfg.ppm_inits.is_empty() {
        return Err(Error::InvalidArgument("ppm-inits is empty".into()));
    }
    let tasks = cells(cfg, &cfg.t, cfg.noise_levels());
    with_pool(cfg.threads, || {
        tasks
            .par_iter()
            .map(|&(t, gamma, run)| {
                let seed = run_seed(cfg.seed, t, gamma, run);
                let inst = generate_instance(cfg, t, gamma, seed);
                cfg.ppm_inits
                    .iter()
                    .map(|&init| {
                        let mut rec = PpmRecord {
                            t,
                            gamma,
                            init,
                            run,
                            seed,
                            rmse_seed: None,
                            rmse_ppm: None,
                            status: "ok".into(),
                        };
                        let res = inst.as_ref().map_err(|e| status_of(e)).and_then(|(truth, a)| {
                            let s = select_and_estimate(cfg, a, truth, gamma, init).map_err(|e| status_of(&e))?;
                            let r0 = rmse(&s.estimate, truth).map_err(|e| status_of(&e))?;
                            rec.rmse_seed = Some(r0);
                            let p = ppm_from_seed(cfg, a, &s.estimate).map_err(|e| status_of(&e))?;
                            rmse(&p.estimate, truth).map_err(|e| status_of(&e))
                        });
                        match res {
                            Ok(r) => rec.rmse_ppm = Some(r),
                            Err(s) => rec.status = s,
                        }
                        rec
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .concat()
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn write_header<W: Write>(w: &mut W, cfg: &ExperimentConfig, kind: &str) -> Result<()> {
    writeln!(w, "# dynsync {kind}")?;
    for line in cfg.to_text().lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Per-cell summary of successful runs, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub t: usize,
    pub gamma: f64,
    pub estimator: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub failures: usize,
}

pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, u64, String)> = Vec::new();
    for r in records {
        let k = (r.t, r.gamma.to_bits(), r.estimator.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(t, g, e)| {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.t == t && r.gamma.to_bits() == g && r.estimator == e).collect();
            let ok: Vec<f64> = cell.iter().filter_map(|r| r.rmse).collect();
            let (mean, std) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&ok) };
            CellSummary {
                t,
                gamma: f64::from_bits(g),
                estimator: e,
                mean,
                std,
                count: ok.len(),
                failures: cell.len() - ok.len(),
            }
        })
        .collect()
}

/// `kind,T,gamma,estimator,run,seed,beta,tau,lambda,rmse,std,count,status`
/// (plus `wall_ms` with timings). `run` rows come first, then one `summary`
/// row per cell whose `rmse` is the mean over successful runs.
pub fn write_sweep_csv<W: Write>(mut w: W, cfg: &ExperimentConfig, kind: &str, records: &[RunRecord]) -> Result<()> {
    write_header(&mut w, cfg, kind)?;
    let timing = cfg.timings;
    write!(w, "kind,T,gamma,estimator,run,seed,beta,tau,lambda,rmse,std,count,status")?;
    writeln!(w, "{}", if timing { ",wall_ms" } else { "" })?;
    for r in records {
        write!(
            w,
            "run,{},{},{},{},{},{},{},{},{},,,{}",
            r.t,
            r.gamma,
            r.estimator,
            r.run,
            r.seed,
            opt(r.beta),
            opt(r.tau),
            opt(r.lambda),
            opt(r.rmse),
            r.status
        )?;
        if timing {
            write!(w, ",{:.3}", r.wall_ms)?;
        }
        writeln!(w)?;
    }
    for s in summarize(records) {
        let status = if s.failures == 0 { "ok".to_string() } else { format!("failures={}", s.failures) };
        let (mean, std) = if s.count == 0 { (String::new(), String::new()) } else { (s.mean.to_string(), s.std.to_string()) };
        write!(w, "summary,{},{},{},,,,,,{},{},{},{}", s.t, s.gamma, s.estimator, mean, std, s.count, status)?;
        if timing {
            write!(w, ",")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `kind,T,gamma,init,run,seed,rmse_seed,rmse_ppm,delta,status`, then
/// `summary` rows carrying per-cell means.
pub fn write_ppm_csv<W: Write>(mut w: W, cfg: &ExperimentConfig, records: &[PpmRecord]) -> Result<()> {
    write_header(&mut w, cfg, "ppm-bench")?;
    writeln!(w, "kind,T,gamma,init,run,seed,rmse_seed,rmse_ppm,delta,status")?;
    let delta = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(s, p)| p - s);
    for r in records {
        writeln!(
            w,
            "run,{},{},{},{},{},{},{},{},{}",
            r.t,
            r.gamma,
            r.init,
            r.run,
            r.seed,
            opt(r.rmse_seed),
            opt(r.rmse_ppm),
            opt(delta(r.rmse_seed, r.rmse_ppm)),
            r.status
        )?;
    }
    let mut keys: Vec<(usize, u64, Method)> = Vec::new();
    for r in records {
        let k = (r.t, r.gamma.to_bits(), r.init);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (t, g, init) in keys {
        let cell: Vec<&PpmRecord> = records.iter().filter(|r| r.t == t && r.gamma.to_bits() == g && r.init == init).collect();
        let ok: Vec<(f64, f64)> = cell.iter().filter_map(|r| r.rmse_seed.zip(r.rmse_ppm)).collect();
        let status = if ok.len() == cell.len() { "ok".to_string() } else { format!("failures={}", cell.len() - ok.len()) };
        if ok.is_empty() {
            writeln!(w, "summary,{t},{},{init},,,,,,{status}", f64::from_bits(g))?;
        } else {
            let k = ok.len() as f64;
            let s0 = ok.iter().map(|x| x.0).sum::<f64>() / k;
            let s1 = ok.iter().map(|x| x.1).sum::<f64>() / k;
            writeln!(w, "summary,{t},{},{init},,,{s0},{s1},{},{status}", f64::from_bits(g), s1 - s0)?;
        }
    }
    Ok(())
}
