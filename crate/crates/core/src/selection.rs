//! Hyperparameter grid over `β ∈ [0, T]` and fidelity-based selection.

use std::collections::BTreeMap;
use std::io::Write;

use crate::estimators::{self, EstimatorConfig, Method};
use crate::linalg::{dot, quad_form};
use crate::signal::{MeasurementStack, StackedSignal};
use crate::{Error, Result};

pub const DEFAULT_LAMBDA_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaGrid {
    values: Vec<f64>,
}

impl BetaGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn equispaced(lo: f64, hi: f64, k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
}

/// `0, 1, …, ⌊√T⌋`, then 5 equispaced points on `[⌊√T⌋, ⌊T^{2/3}⌋]` and 5 on
/// `[⌊T^{2/3}⌋, T]`, sorted with exact duplicates removed.
pub fn build_beta_grid(t: usize) -> BetaGrid {
    let t = t.max(1);
    let tf = t as f64;
    let mut sq = tf.sqrt().floor();
    if (sq + 1.0) * (sq + 1.0) <= tf {
        sq += 1.0;
    }
    let mut tt = tf.powf(2.0 / 3.0).floor();
    if (tt + 1.0).powi(3) <= tf * tf {
        tt += 1.0;
    }
    let mut values: Vec<f64> = (0..=sq as usize).map(|i| i as f64).collect();
    values.extend(equispaced(sq, tt, 5));
    values.extend(equispaced(tt, tf, 5));
    values.sort_by(f64::total_cmp);
    values.dedup();
    BetaGrid { values }
}

/// `τ = min(⌊β⌋ + 1, T)`
pub fn beta_to_tau(beta: f64, t: usize) -> usize {
    ((beta.floor() as usize) + 1).min(t)
}

/// `λ = β · λ_scale`
pub fn beta_to_lambda(beta: f64, lambda_scale: f64) -> f64 {
    beta * lambda_scale
}

/// `Σ_k g̃(k)^H Ã(k) g̃(k) + 2 Re(b(k)^H g̃(k))`
pub fn data_fidelity(a: &MeasurementStack, g: &StackedSignal) -> Result<f64> {
    if a.n() != g.n() || a.t() != g.t() {
        return Err(Error::Shape(format!(
            "data is n={}, T={} but signal is n={}, T={}",
            a.n(),
            a.t(),
            g.n(),
            g.t()
        )));
    }
    if !g.is_anchored() {
        return Err(Error::InvalidArgument("fidelity needs an anchored signal".into()));
    }
    Ok((0..a.t())
        .map(|k| {
            let (tilde, b) = a.split(k);
            let gt = g.block(k).tail();
            quad_form(&tilde, gt).re + 2.0 * dot(&b, gt).re
        })
        .sum())
}

/// Index of the largest fidelity; ties go to the first.
pub fn select_beta_argmax(fidelities: &[f64]) -> Result<usize> {
    if fidelities.is_empty() {
        return Err(Error::InvalidArgument("empty fidelity curve".into()));
    }
    Ok((0..fidelities.len()).fold(0, |best, i| if fidelities[i] > fidelities[best] { i } else { best }))
}

/// Interior index `i` maximizing `|s_i - s_{i-1}|` where
/// `s_i = (F_{i+1} - F_i) / (β_{i+1} - β_i)`; ties go to the first.
pub fn select_beta_slope_change(grid: &[f64], fidelities: &[f64]) -> Result<usize> {
    if grid.len() != fidelities.len() {
        return Err(Error::Shape(format!("{} grid points but {} fidelities", grid.len(), fidelities.len())));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidArgument("slope-change rule needs at least 3 grid points".into()));
    }
    let slopes: Vec<f64> = (0..grid.len() - 1)
        .map(|i| (fidelities[i + 1] - fidelities[i]) / (grid[i + 1] - grid[i]))
        .collect();
    let mut best = 1;
    let mut best_val = f64::NEG_INFINITY;
    for i in 1..slopes.len() {
        let v = (slopes[i] - slopes[i - 1]).abs();
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Argmax,
    SlopeChange,
}

impl SelectionRule {
    /// Rule used in automatic mode.
    pub fn for_method(m: Method) -> Self {
        match m {
            Method::Gtrs | Method::Ppm => SelectionRule::Argmax,
            _ => SelectionRule::SlopeChange,
        }
    }

    pub fn select(self, grid: &[f64], fidelities: &[f64]) -> Result<usize> {
        match self {
            SelectionRule::Argmax => select_beta_argmax(fidelities),
            SelectionRule::SlopeChange => select_beta_slope_change(grid, fidelities),
        }
    }
}

/// One grid point: the estimate and its fidelity.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub beta: f64,
    pub tau: usize,
    pub lambda: f64,
    pub estimate: StackedSignal,
    pub fidelity: f64,
}

/// Runs a smooth estimator at every `β` of the grid. Work that depends only on
/// `τ` is shared between grid points mapping to the same `τ`, and `ltrs-gs`
/// solves its local problems once.
pub fn run_grid(a: &MeasurementStack, method: Method, grid: &BetaGrid, lambda_scale: f64) -> Result<Vec<GridPoint>> {
    let t = a.t();
    let local = if method == Method::LtrsGs { Some(estimators::local_trs_stack(a)?) } else { None };
    let mut by_tau: BTreeMap<usize, StackedSignal> = BTreeMap::new();
    let mut out = Vec::with_capacity(grid.len());
    for &beta in grid.values() {
        let tau = beta_to_tau(beta, t);
        let lambda = beta_to_lambda(beta, lambda_scale);
        let estimate = match method {
            Method::Gtrs => estimators::estimate_gtrs(a, lambda)?,
            Method::LtrsGs | Method::GmdLtrs | Method::GmdSpectral => {
                if let Some(g) = by_tau.get(&tau) {
                    g.clone()
                } else {
                    let g = match method {
                        Method::LtrsGs => estimators::ltrs_gs_from_local(a.n(), t, local.as_ref().unwrap(), tau)?,
                        Method::GmdLtrs => estimators::estimate_gmd_ltrs(a, tau)?,
                        _ => estimators::estimate_gmd_spectral(a, tau)?,
                    };
                    by_tau.insert(tau, g.clone());
                    g
                }
            }
            Method::Ppm | Method::NaiveSpectral => {
                return Err(Error::InvalidArgument(format!("{method} has no grid of its own")))
            }
        };
        let fidelity = data_fidelity(a, &estimate)?;
        out.push(GridPoint { beta, tau, lambda, estimate, fidelity });
    }
    Ok(out)
}

/// Grid search followed by the method's selection rule.
pub fn select(a: &MeasurementStack, method: Method, grid: &BetaGrid, lambda_scale: f64, rule: SelectionRule) -> Result<(Vec<GridPoint>, usize)> {
    let points = run_grid(a, method, grid, lambda_scale)?;
    let f: Vec<f64> = points.iter().map(|p| p.fidelity).collect();
    let idx = rule.select(grid.values(), &f)?;
    Ok((points, idx))
}

/// Config for the estimator at a grid point.
pub fn config_at(method: Method, beta: f64, t: usize, lambda_scale: f64) -> EstimatorConfig {
    let cfg = EstimatorConfig::new(method);
    if method.uses_lambda() {
        cfg.with_lambda(beta_to_lambda(beta, lambda_scale))
    } else if method.uses_tau() {
        cfg.with_tau(beta_to_tau(beta, t))
    } else {
        cfg
    }
}

/// `beta,fidelity,rmse` rows; `rmse` left empty without a truth.
pub fn write_fidelity_curve<W: Write>(mut w: W, points: &[GridPoint], truth: Option<&StackedSignal>) -> Result<()> {
    writeln!(w, "beta,fidelity,rmse")?;
    for p in points {
        let r = match truth {
            Some(g) => format!("{}", crate::metrics::rmse(&p.estimate, g)?),
            None => String::new(),
        };
        writeln!(w, "{},{},{}", p.beta, p.fidelity, r)?;
    }
    Ok(())
}
