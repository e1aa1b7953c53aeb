//! Estimators mapping a measurement stack to an anchored signal stack.
//!
//! | method           | smoothing                         | per-block step           |
//! |------------------|-----------------------------------|--------------------------|
//! | `gtrs`           | penalty `λ g̃^H (L ⊗ I) g̃`         | one global sphere problem |
//! | `ltrs-gs`        | `P_{τ,n-1}` on local solutions    | sphere problem per block  |
//! | `gmd-ltrs`       | `P_{τ,n}` on the data             | sphere problem per block  |
//! | `gmd-spectral`   | `P_{τ,n}` on the data             | top eigenvector           |
//! | `ppm`            | penalty, as `gtrs`                | projected power steps     |
//! | `naive-spectral` | none                              | top eigenvector           |

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::{self, matvec};
use crate::signal::{anchor_block, anchored_split, project_to_circle, DenoisedStack, MeasurementStack, StackedSignal, UnitSignal};
use crate::spectral::SmoothProjector;
use crate::trs::{solve_trs_with, HermitianOperator, TrsOptions, TrsProblem, ORACLE_MAX_DIM};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub const PPM_DEFAULT_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gtrs,
    LtrsGs,
    GmdLtrs,
    GmdSpectral,
    Ppm,
    NaiveSpectral,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Gtrs,
        Method::LtrsGs,
        Method::GmdLtrs,
        Method::GmdSpectral,
        Method::Ppm,
        Method::NaiveSpectral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gtrs => "gtrs",
            Method::LtrsGs => "ltrs-gs",
            Method::GmdLtrs => "gmd-ltrs",
            Method::GmdSpectral => "gmd-spectral",
            Method::Ppm => "ppm",
            Method::NaiveSpectral => "naive-spectral",
        }
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, Method::Gtrs | Method::Ppm)
    }

    pub fn uses_tau(self) -> bool {
        matches!(self, Method::LtrsGs | Method::GmdLtrs | Method::GmdSpectral)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    pub lambda: Option<f64>,
    pub tau: Option<usize>,
    pub ppm_iters: usize,
    /// Seed estimator for `ppm`; it reads `lambda` or `tau` from this config.
    pub ppm_init: Option<Method>,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self { method, lambda: None, tau: None, ppm_iters: PPM_DEFAULT_ITERS, ppm_init: None }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_ppm_init(mut self, init: Method) -> Self {
        self.ppm_init = Some(init);
        self
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs lambda", self.method)))
    }

    fn tau(&self) -> Result<usize> {
        self.tau.ok_or_else(|| Error::InvalidArgument(format!("{} needs tau", self.method)))
    }
}

pub fn estimate(a: &MeasurementStack, cfg: &EstimatorConfig) -> Result<StackedSignal> {
    match cfg.method {
        Method::Gtrs => estimate_gtrs(a, cfg.lambda()?),
        Method::LtrsGs => estimate_ltrs_gs(a, cfg.tau()?),
        Method::GmdLtrs => estimate_gmd_ltrs(a, cfg.tau()?),
        Method::GmdSpectral => estimate_gmd_spectral(a, cfg.tau()?),
        Method::NaiveSpectral => estimate_naive_spectral(a),
        Method::Ppm => {
            let init = cfg
                .ppm_init
                .ok_or_else(|| Error::InvalidArgument("ppm needs an init estimator".into()))?;
            if init == Method::Ppm {
                return Err(Error::InvalidArgument("ppm cannot seed itself".into()));
            }
            let seed = estimate(a, &EstimatorConfig { method: init, ..cfg.clone() })?;
            estimate_ppm(a, cfg.lambda()?, cfg.ppm_iters, &seed)
        }
    }
}

fn trs_options() -> TrsOptions {
    TrsOptions::default()
}

/// `B = blkdiag(Ã(1), …, Ã(T)) - λ (L ⊗ I_{n-1})` applied matrix-free, with
/// `L` the path-graph Laplacian on `T` nodes. Vectors are time-major.
#[derive(Debug, Clone)]
pub struct GtrsOperator {
    blocks: Vec<DMatrix<C64>>,
    lambda: f64,
    m: usize,
}

impl GtrsOperator {
    pub fn new(a: &MeasurementStack, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and >= 0")));
        }
        if a.n() < 2 {
            return Err(Error::InvalidArgument("need n >= 2".into()));
        }
        let blocks = (0..a.t()).map(|k| a.split(k).0).collect();
        Ok(Self { blocks, lambda, m: a.n() - 1 })
    }

    pub fn linear_term(a: &MeasurementStack) -> Vec<C64> {
        (0..a.t()).flat_map(|k| a.split(k).1).collect()
    }

    pub fn assemble_dense(&self) -> DMatrix<C64> {
        let (m, t) = (self.m, self.blocks.len());
        let d = m * t;
        let mut out = DMatrix::from_element(d, d, ZERO);
        for (k, blk) in self.blocks.iter().enumerate() {
            out.view_mut((k * m, k * m), (m, m)).copy_from(blk);
            let deg = (k > 0) as usize + (k + 1 < t) as usize;
            for i in 0..m {
                out[(k * m + i, k * m + i)] -= C64::new(self.lambda * deg as f64, 0.0);
                if k + 1 < t {
                    out[(k * m + i, (k + 1) * m + i)] += C64::new(self.lambda, 0.0);
                    out[((k + 1) * m + i, k * m + i)] += C64::new(self.lambda, 0.0);
                }
            }
        }
        out
    }
}

impl HermitianOperator for GtrsOperator {
    fn dim(&self) -> usize {
        self.m * self.blocks.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (m, t) = (self.m, self.blocks.len());
        let lam = C64::new(self.lambda, 0.0);
        for k in 0..t {
            let xs = &x[k * m..(k + 1) * m];
            let ys = &mut y[k * m..(k + 1) * m];
            matvec(&self.blocks[k], xs, ys);
            if self.lambda != 0.0 {
                for i in 0..m {
                    let mut lx = ZERO;
                    if k > 0 {
                        lx += xs[i] - x[(k - 1) * m + i];
                    }
                    if k + 1 < t {
                        lx += xs[i] - x[(k + 1) * m + i];
                    }
                    ys[i] -= lam * lx;
                }
            }
        }
    }

    fn dense(&self) -> Option<DMatrix<C64>> {
        (self.dim() <= ORACLE_MAX_DIM).then(|| self.assemble_dense())
    }
}

fn from_tails_projected(n: usize, tails: &[C64]) -> Result<StackedSignal> {
    StackedSignal::from_tails(n, &project_to_circle(tails))
}

/// Global sphere relaxation with radius² `(n-1)T`, then per-entry circle
/// projection.
pub fn estimate_gtrs(a: &MeasurementStack, lambda: f64) -> Result<StackedSignal> {
    let op = GtrsOperator::new(a, lambda)?;
    let r = (op.dim() as f64).sqrt();
    let p = TrsProblem::new(op, GtrsOperator::linear_term(a), r)?;
    let sol = solve_trs_with(&p, &trs_options()).map_err(|e| e.context(format!("gtrs (lambda = {lambda})")))?;
    from_tails_projected(a.n(), &sol.z)
}

fn local_trs(blk: &DMatrix<C64>, k: usize) -> Result<Vec<C64>> {
    let (tilde, b) = anchored_split(blk);
    let r = (tilde.nrows() as f64).sqrt();
    let p = TrsProblem::dense(tilde, b, r).map_err(|e| e.context(format!("block {k}")))?;
    let sol = solve_trs_with(&p, &trs_options()).map_err(|e| e.context(format!("local sphere problem, block {k}")))?;
    Ok(sol.z)
}

fn local_trs_all(blocks: &[DMatrix<C64>]) -> Result<Vec<C64>> {
    let parts: Vec<Vec<C64>> = blocks
        .par_iter()
        .enumerate()
        .map(|(k, b)| local_trs(b, k))
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Stacked per-block sphere solutions (radius² `n-1`), time-major. These do
/// not depend on `τ`, so a grid search can compute them once.
pub fn local_trs_stack(a: &MeasurementStack) -> Result<Vec<C64>> {
    if a.n() < 2 {
        return Err(Error::InvalidArgument("need n >= 2".into()));
    }
    local_trs_all(a.blocks())
}

/// Second half of `ltrs-gs`: smooth the local solutions with `P_{τ,n-1}`.
pub fn ltrs_gs_from_local(n: usize, t: usize, local: &[C64], tau: usize) -> Result<StackedSignal> {
    let proj = SmoothProjector::for_shape(t, tau, n - 1)?;
    from_tails_projected(n, &proj.apply_vector(local)?)
}

pub fn estimate_ltrs_gs(a: &MeasurementStack, tau: usize) -> Result<StackedSignal> {
    check_tau(a, tau)?;
    let local = local_trs_stack(a)?;
    ltrs_gs_from_local(a.n(), a.t(), &local, tau)
}

fn check_tau(a: &MeasurementStack, tau: usize) -> Result<()> {
    if tau == 0 || tau > a.t() {
        return Err(Error::InvalidArgument(format!("tau = {tau} outside [1, {}]", a.t())));
    }
    Ok(())
}

/// `Ĝ = P_{τ,n} A`, Hermitianized per block.
pub fn denoise(a: &MeasurementStack, tau: usize) -> Result<DenoisedStack> {
    check_tau(a, tau)?;
    let proj = SmoothProjector::for_shape(a.t(), tau, a.n())?;
    Ok(DenoisedStack::new(proj.apply(a.blocks())?).hermitianize())
}

pub fn gmd_ltrs_from_denoised(n: usize, g: &DenoisedStack) -> Result<StackedSignal> {
    from_tails_projected(n, &local_trs_all(g.blocks())?)
}

pub fn estimate_gmd_ltrs(a: &MeasurementStack, tau: usize) -> Result<StackedSignal> {
    if a.n() < 2 {
        return Err(Error::InvalidArgument("need n >= 2".into()));
    }
    gmd_ltrs_from_denoised(a.n(), &denoise(a, tau)?)
}

/// Top eigenvector, circle projection, anchoring.
fn spectral_block(m: &DMatrix<C64>, k: usize) -> Result<UnitSignal> {
    let (_, v) = linalg::top_eigenpair(m).map_err(|e| match e {
        Error::EigenNotConverged { .. } => Error::EigenNotConverged { block: k },
        e => e,
    })?;
    Ok(anchor_block(&project_to_circle(&v)))
}

pub fn gmd_spectral_from_denoised(g: &DenoisedStack) -> Result<StackedSignal> {
    let blocks = g
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, m)| spectral_block(m, k))
        .collect::<Result<_>>()?;
    StackedSignal::new(blocks)
}

pub fn estimate_gmd_spectral(a: &MeasurementStack, tau: usize) -> Result<StackedSignal> {
    gmd_spectral_from_denoised(&denoise(a, tau)?)
}

/// Per raw block top eigenvector. An all-zero block yields the all-ones block.
pub fn estimate_naive_spectral(a: &MeasurementStack) -> Result<StackedSignal> {
    let n = a.n();
    let blocks = a
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, m)| {
            if m.iter().all(|z| *z == ZERO) {
                UnitSignal::new(vec![C64::new(1.0, 0.0); n])
            } else {
                spectral_block(m, k)
            }
        })
        .collect::<Result<_>>()?;
    StackedSignal::new(blocks)
}

/// Projected power iterations `g̃ ← P_C(B g̃ + b)` from `init`, at most
/// `iters` steps, stopping once a step moves less than `1e-10 √((n-1)T)`.
pub fn estimate_ppm(a: &MeasurementStack, lambda: f64, iters: usize, init: &StackedSignal) -> Result<StackedSignal> {
    if iters == 0 {
        return Err(Error::InvalidArgument("ppm needs at least one iteration".into()));
    }
    if init.n() != a.n() || init.t() != a.t() {
        return Err(Error::Shape(format!(
            "init is n={}, T={} but data is n={}, T={}",
            init.n(),
            init.t(),
            a.n(),
            a.t()
        )));
    }
    if !init.is_anchored() {
        return Err(Error::InvalidArgument("ppm init must be anchored".into()));
    }
    let op = GtrsOperator::new(a, lambda)?;
    let b = GtrsOperator::linear_term(a);
    let stop = 1e-10 * (op.dim() as f64).sqrt();
    let mut g = init.tails_flat();
    let mut next = vec![ZERO; g.len()];
    for _ in 0..iters {
        op.apply(&g, &mut next);
        for (x, bi) in next.iter_mut().zip(&b) {
            *x += bi;
        }
        let projected = project_to_circle(&next);
        let step = linalg::dist(&projected, &g);
        g = projected;
        if step <= stop {
            break;
        }
    }
    StackedSignal::from_tails(a.n(), &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rmse;
    use crate::synthgen::{generate_agn, generate_smooth_truth, AgnParams, GroundTruthSpec};
    use crate::trs::DenseHermitian;

    fn clean(n: usize, t: usize, seed: u64) -> (StackedSignal, MeasurementStack) {
        let g = generate_smooth_truth(&GroundTruthSpec { n, t, s_target: 1.0 / t as f64, seed }).unwrap();
        let a = generate_agn(&g, &AgnParams::new(n, t, 0.0).unwrap(), seed).unwrap();
        (g, a)
    }

    fn noisy(n: usize, t: usize, sigma: f64, s: f64, seed: u64) -> (StackedSignal, MeasurementStack) {
        let g = generate_smooth_truth(&GroundTruthSpec { n, t, s_target: s, seed }).unwrap();
        let a = generate_agn(&g, &AgnParams::new(n, t, sigma).unwrap(), seed + 1000).unwrap();
        (g, a)
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("spectral".parse::<Method>().is_err());
    }

    #[test]
    fn operator_matches_dense_assembly() {
        let (_, a) = noisy(4, 5, 1.0, 0.5, 3);
        let op = GtrsOperator::new(&a, 2.5).unwrap();
        let dense = DenseHermitian(op.assemble_dense());
        let x: Vec<C64> = (0..op.dim()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut y1 = vec![ZERO; op.dim()];
        let mut y2 = vec![ZERO; op.dim()];
        op.apply(&x, &mut y1);
        dense.apply(&x, &mut y2);
        assert!(linalg::dist(&y1, &y2) < 1e-12);
        assert!(linalg::hermitian_deviation(&op.assemble_dense()) == 0.0);
    }

    #[test]
    fn clean_data_is_recovered() {
        let (g, a) = clean(10, 5, 1);
        let t = a.t();
        for est in [
            estimate_gtrs(&a, 0.0).unwrap(),
            estimate_ltrs_gs(&a, t).unwrap(),
            estimate_gmd_ltrs(&a, t).unwrap(),
            estimate_gmd_spectral(&a, t).unwrap(),
            estimate_naive_spectral(&a).unwrap(),
        ] {
            assert!(rmse(&est, &g).unwrap() < 1e-6);
        }
    }

    #[test]
    fn single_block_gtrs_is_local_problem() {
        let (_, a) = noisy(6, 1, 0.5, 0.0, 4);
        let g1 = estimate_gtrs(&a, 3.0).unwrap();
        let g2 = estimate_ltrs_gs(&a, 1).unwrap();
        assert!(linalg::dist(&g1.flatten(), &g2.flatten()) < 1e-8);
    }

    #[test]
    fn huge_penalty_flattens_gtrs() {
        let (_, a) = noisy(5, 6, 1.0, 1.0, 5);
        let spread = |lam: f64| {
            let g = estimate_gtrs(&a, lam).unwrap();
            (1..a.t()).map(|k| linalg::dist(g.block(k).values(), g.block(0).values())).fold(0.0, f64::max)
        };
        let (s0, s1) = (spread(0.0), spread(1e6));
        assert!(s1 < 1e-3 && s1 < s0, "{s0} -> {s1}");
    }

    #[test]
    fn ppm_fixed_point_and_validation() {
        let (g, a) = clean(10, 5, 2);
        let out = estimate_ppm(&a, 0.0, 1, &g).unwrap();
        assert!(linalg::dist(&out.flatten(), &g.flatten()) < 1e-12);
        assert!(estimate_ppm(&a, 0.0, 0, &g).is_err());
        let cfg = EstimatorConfig::new(Method::Ppm).with_lambda(0.0).with_tau(5);
        assert!(estimate(&a, &cfg).is_err());
        let cfg = cfg.with_ppm_init(Method::GmdLtrs);
        assert!(rmse(&estimate(&a, &cfg).unwrap(), &g).unwrap() < 1e-6);
    }

    #[test]
    fn zero_block_gives_ones() {
        let a = MeasurementStack::new(vec![DMatrix::from_element(3, 3, ZERO)]).unwrap();
        let g = estimate_naive_spectral(&a).unwrap();
        assert!(g.block(0).values().iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn averaging_helps_for_static_truth() {
        let mut wins = 0;
        for seed in 0..20 {
            let (g, a) = noisy(8, 10, 1.5, 0.0, seed);
            let lo = rmse(&estimate_ltrs_gs(&a, 1).unwrap(), &g).unwrap();
            let hi = rmse(&estimate_ltrs_gs(&a, 10).unwrap(), &g).unwrap();
            wins += (lo < hi) as usize;
        }
        assert_eq!(wins, 20);
    }

    #[test]
    fn tau_one_spectral_equals_time_average() {
        let (_, a) = noisy(5, 6, 1.0, 0.0, 6);
        let est = estimate_gmd_spectral(&a, 1).unwrap();
        let mean = a.blocks().iter().fold(DMatrix::from_element(5, 5, ZERO), |s, b| s + b) / C64::new(6.0, 0.0);
        let (_, v) = linalg::top_eigenpair(&mean).unwrap();
        let want = anchor_block(&project_to_circle(&v));
        for blk in est.blocks() {
            assert!(linalg::dist(blk.values(), want.values()) < 1e-10);
        }
    }
}
