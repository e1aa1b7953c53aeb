//! Seeded synthetic data: smooth ground truths and the two noise models.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::DMatrix;

use crate::rng::{self, kind};
use crate::signal::{MeasurementStack, StackedSignal};
use crate::spectral::SmoothProjector;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Additive Gaussian noise: `A(k) = (G*(k) - I) + σ W(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgnParams {
    pub n: usize,
    pub t: usize,
    pub sigma: f64,
}

impl AgnParams {
    pub fn new(n: usize, t: usize, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} must be finite and >= 0")));
        }
        Ok(Self { n, t, sigma })
    }
}

/// Erdős–Rényi graph with corrupted edges: each pair is observed with
/// probability `p(k)`, and an observed edge is replaced by a uniform random
/// phase with probability `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutliersParams {
    pub n: usize,
    pub t: usize,
    pub eta: f64,
    pub p: Vec<f64>,
}

impl OutliersParams {
    pub fn new(n: usize, eta: f64, p: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!("eta = {eta} outside [0, 1]")));
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidArgument(format!("p = {bad} outside [0, 1]")));
        }
        if p.is_empty() {
            return Err(Error::InvalidArgument("p must have one entry per time block".into()));
        }
        Ok(Self { n, t: p.len(), eta, p })
    }

    pub fn constant(n: usize, t: usize, eta: f64, p: f64) -> Result<Self> {
        Self::new(n, eta, vec![p; t])
    }

    /// Diagonal of `D = (1-η) blkdiag(p(k) I_n)`, one entry per time block.
    pub fn scaling(&self) -> Vec<f64> {
        self.p.iter().map(|p| (1.0 - self.eta) * p).collect()
    }
}

/// Smooth ground-truth recipe parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSpec {
    pub n: usize,
    pub t: usize,
    pub s_target: f64,
    pub seed: u64,
}

/// Number of retained frequencies in the truth recipe:
/// `τ' = min(⌊1 + √(T S_T)⌋, T)`.
pub fn truth_bandwidth(t: usize, s_target: f64) -> usize {
    ((1.0 + (t as f64 * s_target).sqrt()).floor() as usize).min(t)
}

/// Smooth anchored truth: a Gaussian in `R^{(n-1)T}` is projected onto the
/// `τ'` lowest time frequencies, rescaled to norm `√T`, mapped entrywise
/// through `x ↦ exp(i·π/2·x)`, and each block is prefixed with `1`.
pub fn generate_smooth_truth(spec: &GroundTruthSpec) -> Result<StackedSignal> {
    let GroundTruthSpec { n, t, s_target, seed } = *spec;
    if n < 2 || t == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and T >= 1 (got n={n}, T={t})")));
    }
    if !(s_target >= 0.0) || !s_target.is_finite() {
        return Err(Error::InvalidArgument(format!("S_T = {s_target} must be finite and >= 0")));
    }
    let tau = truth_bandwidth(t, s_target);
    let proj = SmoothProjector::for_shape(t, tau, n - 1)?;
    let m = (n - 1) * t;
    for attempt in 0u64.. {
        let mut r = rng::stream(seed, kind::TRUTH, attempt);
        let u: Vec<C64> = (0..m).map(|_| C64::new(rng::normal(&mut r), 0.0)).collect();
        let pu = proj.apply_vector(&u)?;
        let nrm = pu.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            continue;
        }
        let s = (t as f64).sqrt() / nrm;
        let tails: Vec<C64> = pu
            .iter()
            .map(|z| C64::from_polar(1.0, FRAC_PI_2 * s * z.re))
            .collect();
        return StackedSignal::from_tails(n, &tails);
    }
    unreachable!()
}

/// Hermitian noise blocks `W(k)`: zero diagonal, strict upper entries i.i.d.
/// standard complex Gaussian. Block `k` draws from its own substream.
pub fn agn_noise(n: usize, t: usize, seed: u64) -> Vec<DMatrix<C64>> {
    (0..t)
        .map(|k| {
            let mut r = rng::stream(seed, kind::AGN, k as u64);
            let mut w = DMatrix::from_element(n, n, ZERO);
            for i in 0..n {
                for j in (i + 1)..n {
                    let z = rng::complex_normal(&mut r);
                    w[(i, j)] = z;
                    w[(j, i)] = z.conj();
                }
            }
            w
        })
        .collect()
}

fn check_shape(truth: &StackedSignal, n: usize, t: usize) -> Result<()> {
    if truth.n() != n || truth.t() != t {
        return Err(Error::Shape(format!(
            "truth is n={}, T={} but parameters say n={n}, T={t}",
            truth.n(),
            truth.t()
        )));
    }
    Ok(())
}

pub fn generate_agn(truth: &StackedSignal, params: &AgnParams, seed: u64) -> Result<MeasurementStack> {
    check_shape(truth, params.n, params.t)?;
    let n = params.n;
    let noise = agn_noise(n, params.t, seed);
    let blocks = truth
        .blocks()
        .iter()
        .zip(noise)
        .map(|(g, w)| {
            let g = g.values();
            let mut a = DMatrix::from_element(n, n, ZERO);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = g[i] * g[j].conj() + w[(i, j)] * params.sigma;
                    a[(i, j)] = v;
                    a[(j, i)] = v.conj();
                }
            }
            a
        })
        .collect();
    MeasurementStack::new(blocks)
}

pub fn generate_outliers(truth: &StackedSignal, params: &OutliersParams, seed: u64) -> Result<MeasurementStack> {
    check_shape(truth, params.n, params.t)?;
    let n = params.n;
    let blocks = truth
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let g = g.values();
            let p = params.p[k];
            let keep = (1.0 - params.eta) * p;
            let mut r = rng::stream(seed, kind::OUTLIERS, k as u64);
            let mut a = DMatrix::from_element(n, n, ZERO);
            for i in 0..n {
                for j in (i + 1)..n {
                    let u = rng::uniform(&mut r);
                    let v = if u < keep {
                        g[i] * g[j].conj()
                    } else if u < p {
                        C64::from_polar(1.0, TAU * rng::uniform(&mut r))
                    } else {
                        continue;
                    };
                    a[(i, j)] = v;
                    a[(j, i)] = v.conj();
                }
            }
            a
        })
        .collect();
    MeasurementStack::new(blocks)
}

/// Centered outlier noise `R(k) = A(k) - (1-η)p(k)(G*(k) - I)`.
pub fn outlier_residual(a: &MeasurementStack, truth: &StackedSignal, params: &OutliersParams) -> Result<Vec<DMatrix<C64>>> {
    check_shape(truth, a.n(), a.t())?;
    let d = params.scaling();
    Ok(a.blocks()
        .iter()
        .zip(truth.shifted_rank_one_blocks())
        .zip(d)
        .map(|((a, g), dk)| a - g * C64::new(dk, 0.0))
        .collect())
}

/// Sub-Gaussian norm of a centered Bernoulli(p) variable,
/// `√((1-2p) / (4 log((1-p)/p)))`, extended by continuity to `p ∈ {0, ½, 1}`.
pub fn bernoulli_psi2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else if (p - 0.5).abs() < 1e-6 {
        (1.0f64 / 8.0).sqrt()
    } else {
        ((1.0 - 2.0 * p) / (4.0 * ((1.0 - p) / p).ln())).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierNoiseStats {
    pub p_max: f64,
    pub p_min: f64,
    /// `(1-η)·mean(p)`
    pub d_bar: f64,
    /// `max_k p(k)(1-p(k))`
    pub v: f64,
    /// `η + Q(η) + max_k Q(p(k))`
    pub q: f64,
    /// `p_max η + (1-η)² V + p_max V (1-η)`
    pub f: f64,
}

pub fn outlier_noise_stats(params: &OutliersParams) -> OutlierNoiseStats {
    let eta = params.eta;
    let p_max = params.p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_min = params.p.iter().copied().fold(f64::INFINITY, f64::min);
    let d_bar = (1.0 - eta) * params.p.iter().sum::<f64>() / params.p.len() as f64;
    let v = params.p.iter().map(|p| p * (1.0 - p)).fold(0.0, f64::max);
    let q = eta + bernoulli_psi2(eta) + params.p.iter().map(|&p| bernoulli_psi2(p)).fold(0.0, f64::max);
    let f = p_max * eta + (1.0 - eta).powi(2) * v + p_max * v * (1.0 - eta);
    OutlierNoiseStats { p_max, p_min, d_bar, v, q, f }
}

/// Empirical ratio `‖P⊥(D Ḡ*)‖²_F / (d̄² ‖P⊥ Ḡ*‖²_F)` for one `τ`.
///
/// This is a diagnostic for the smoothness of the edge-probability profile; it
/// is not an estimate of the smoothness constant itself. Returns `None` when
/// the denominator vanishes.
pub fn scaling_smoothness_ratio(truth: &StackedSignal, params: &OutliersParams, tau: usize) -> Result<Option<f64>> {
    check_shape(truth, params.n, params.t)?;
    let proj = SmoothProjector::for_shape(params.t, tau, params.n)?;
    let shifted = truth.shifted_rank_one_blocks();
    let scaled: Vec<_> = shifted
        .iter()
        .zip(params.scaling())
        .map(|(g, d)| g * C64::new(d, 0.0))
        .collect();
    let num: f64 = proj.apply_complement(&scaled)?.iter().map(|b| b.norm_squared()).sum();
    let den: f64 = proj.apply_complement(&shifted)?.iter().map(|b| b.norm_squared()).sum();
    let d_bar = outlier_noise_stats(params).d_bar;
    let den = d_bar * d_bar * den;
    Ok(if den > 0.0 { Some(num / den) } else { None })
}
