//! Invariant suite behind `dynsync selftest`.
//!
//! Each check is a small randomized or exact property test on the library's
//! public API. Checks never panic; a failure carries a short explanation.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::estimators::{self, Method};
use crate::experiment::{self, ExperimentConfig};
use crate::linalg::{self, dist, dot, norm};
use crate::metrics;
use crate::rng::{self, kind, StreamRng};
use crate::selection;
use crate::signal::{self, anchor_block, project_to_circle, MeasurementStack, StackedSignal};
use crate::spectral::SmoothProjector;
use crate::synthgen::{self, AgnParams, GroundTruthSpec, OutliersParams};
use crate::trs::{self, DenseHermitian, TrsProblem};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<String, String>;

pub const CHECKS: &[(&str, Check)] = &[
    ("signal/circle-projection-idempotent", circle_projection_idempotent),
    ("signal/anchor-exact-one", anchor_exact_one),
    ("signal/smoothness-sandwich", smoothness_sandwich),
    ("signal/measurement-validation", measurement_validation),
    ("spectral/projector-algebra", projector_algebra),
    ("spectral/complement-monotone", complement_monotone),
    ("spectral/bias-bound", bias_bound),
    ("synthgen/determinism", generator_determinism),
    ("synthgen/stack-invariants", stack_invariants),
    ("synthgen/agn-variance-scaling", agn_variance_scaling),
    ("synthgen/outliers-variance-scaling", outliers_variance_scaling),
    ("trs/oracle-agreement", trs_oracle_agreement),
    ("trs/phase-covariance", trs_phase_covariance),
    ("trs/secular-monotone", trs_secular_monotone),
    ("trs/beats-naive-point", trs_beats_naive_point),
    ("trs/real-embedding", trs_real_embedding),
    ("estimators/unit-anchored-output", estimators_unit_anchored),
    ("estimators/gmd-full-rank-is-local", gmd_full_rank_is_local),
    ("estimators/global-phase-consistency", global_phase_consistency),
    ("estimators/hermitianize-contraction", hermitianize_contraction),
    ("selection/fidelity-real", fidelity_real),
    ("selection/grid-shape", grid_shape),
    ("selection/deterministic", selection_deterministic),
    ("metrics/rmse-metric", rmse_metric),
    ("metrics/tau-star-range-monotone", tau_star_range_monotone),
    ("experiment/csv-reproducible", csv_reproducible),
    ("experiment/config-echo", config_echo),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS.iter().map(|&(name, f)| run_one(name, f)).collect()
}

fn run_one(name: &'static str, f: Check) -> CheckOutcome {
    let start = Instant::now();
    let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok(detail) => CheckOutcome { name, passed: true, detail, seconds },
        Err(detail) => CheckOutcome { name, passed: false, detail, seconds },
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn samples(index: u64) -> StreamRng {
    rng::stream(0x5e1f, kind::SAMPLES, index)
}

fn random_vec(r: &mut StreamRng, m: usize) -> Vec<C64> {
    (0..m).map(|_| rng::complex_normal(r)).collect()
}

fn random_signal(r: &mut StreamRng, n: usize, t: usize) -> StackedSignal {
    let tails: Vec<C64> = (0..(n - 1) * t)
        .map(|_| C64::from_polar(1.0, std::f64::consts::TAU * rng::uniform(r)))
        .collect();
    StackedSignal::from_tails(n, &tails).expect("unit entries")
}

fn random_blocks(r: &mut StreamRng, n: usize, m: usize, t: usize) -> Vec<DMatrix<C64>> {
    (0..t).map(|_| DMatrix::from_fn(n, m, |_, _| rng::complex_normal(r))).collect()
}

fn frob2(x: &[DMatrix<C64>]) -> f64 {
    x.iter().map(|b| b.norm_squared()).sum()
}

fn truth(n: usize, t: usize, s: f64, seed: u64) -> StackedSignal {
    synthgen::generate_smooth_truth(&GroundTruthSpec { n, t, s_target: s, seed }).expect("valid spec")
}

fn circle_projection_idempotent() -> Result<String, String> {
    let mut r = samples(1);
    for _ in 0..200 {
        let mut z = random_vec(&mut r, 17);
        z[3] = ZERO;
        let p = project_to_circle(&z);
        ensure(project_to_circle(&p) == p, || "P(P(z)) != P(z)".into())?;
    }
    Ok("200 vectors".into())
}

fn anchor_exact_one() -> Result<String, String> {
    let mut r = samples(2);
    for i in 0..200 {
        let mut z = project_to_circle(&random_vec(&mut r, 9));
        if i % 10 == 0 {
            z[0] = ZERO;
        }
        let a = anchor_block(&z);
        ensure(a.values()[0] == C64::new(1.0, 0.0), || "first entry not exactly 1".into())?;
    }
    Ok("200 blocks".into())
}

fn smoothness_sandwich() -> Result<String, String> {
    let mut r = samples(3);
    for _ in 0..200 {
        let n = 3 + (rng::uniform(&mut r) * 18.0) as usize;
        let t = 2 + (rng::uniform(&mut r) * 29.0) as usize;
        let g = random_signal(&mut r, n, t);
        let s = signal::smoothness_of(&g);
        let ms = signal::matrix_smoothness_of(&g.rank_one_blocks()).map_err(|e| e.to_string())?;
        let tol = 1e-9 * ms.max(1.0);
        ensure(2.0 * s <= ms + tol && ms <= (2.0 + 4.0 * n as f64) * s + tol, || {
            format!("n={n} T={t}: s={s} matrix={ms}")
        })?;
    }
    Ok("200 signals".into())
}

fn measurement_validation() -> Result<String, String> {
    let mut good = DMatrix::from_element(3, 3, ZERO);
    good[(0, 1)] = C64::new(1.0, 2.0);
    good[(1, 0)] = C64::new(1.0, -2.0);
    ensure(MeasurementStack::new(vec![good.clone()]).is_ok(), || "valid block rejected".into())?;
    let mut asym = good.clone();
    asym[(1, 0)] = C64::new(1.0, 2.0);
    ensure(MeasurementStack::new(vec![asym]).is_err(), || "non-Hermitian block accepted".into())?;
    let mut diag = good;
    diag[(2, 2)] = C64::new(1e-3, 0.0);
    ensure(MeasurementStack::new(vec![diag]).is_err(), || "nonzero diagonal accepted".into())?;
    Ok("3 cases".into())
}

fn projector_algebra() -> Result<String, String> {
    let mut r = samples(4);
    let mut worst = 0.0f64;
    for &(t, n, m) in &[(7, 3, 3), (20, 5, 2), (50, 4, 4)] {
        for tau in [1, t / 3 + 1, t] {
            let proj = SmoothProjector::for_shape(t, tau, n).map_err(|e| e.to_string())?;
            let x = random_blocks(&mut r, n, m, t);
            let px = proj.apply(&x).map_err(|e| e.to_string())?;
            let ppx = proj.apply(&px).map_err(|e| e.to_string())?;
            let nx = frob2(&x);
            let idem: f64 = px.iter().zip(&ppx).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
            let inner: C64 = px.iter().zip(&x).map(|(p, x)| (p.adjoint() * (x - p)).trace()).sum();
            let rest: Vec<_> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
            let pyth = (nx - frob2(&px) - frob2(&rest)).abs() / nx;
            worst = worst.max(idem / nx.sqrt()).max(inner.norm() / nx).max(pyth);
            ensure(idem <= 1e-9 * nx.sqrt() && inner.norm() <= 1e-9 * nx && pyth <= 1e-9, || {
                format!("T={t} tau={tau}: idem {idem:e} inner {:e} pyth {pyth:e}", inner.norm())
            })?;
        }
    }
    Ok(format!("max relative defect {worst:.1e}"))
}

fn complement_monotone() -> Result<String, String> {
    let mut r = samples(5);
    let t = 25;
    let x = random_blocks(&mut r, 3, 3, t);
    let mut prev = f64::INFINITY;
    for tau in 1..=t {
        let c = frob2(&SmoothProjector::for_shape(t, tau, 3).and_then(|p| p.apply_complement(&x)).map_err(|e| e.to_string())?);
        ensure(c <= prev * (1.0 + 1e-12) + 1e-12, || format!("tau={tau}: {c} > {prev}"))?;
        prev = c;
    }
    ensure(prev < 1e-20 * frob2(&x).max(1.0) + 1e-18, || "complement at tau=T is not zero".into())?;
    Ok("T=25".into())
}

fn bias_bound() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 3 + (seed % 8) as usize;
        let t = 5 + (seed % 26) as usize;
        let s = [1.0 / t as f64, 1.0, (t as f64).powf(0.25)][(seed % 3) as usize];
        let g = truth(n, t, s, seed);
        for tau in 1..=t {
            let d = metrics::bias_diagnostic(&g, tau).map_err(|e| e.to_string())?;
            if tau == t {
                ensure(d.bound == 0.0 && d.measured < 1e-18, || format!("seed {seed}: tau=T gives {d:?}"))?;
            } else {
                ensure(d.measured <= d.bound, || format!("seed {seed} tau {tau}: {d:?}"))?;
                if d.bound > 0.0 {
                    worst = worst.max(d.measured / d.bound);
                }
            }
        }
    }
    Ok(format!("100 truths, max measured/bound {worst:.3}"))
}

fn generator_determinism() -> Result<String, String> {
    let g1 = truth(8, 12, 0.3, 77);
    let g2 = truth(8, 12, 0.3, 77);
    ensure(g1 == g2, || "truth differs".into())?;
    let p = AgnParams::new(8, 12, 1.0).map_err(|e| e.to_string())?;
    let a1 = synthgen::generate_agn(&g1, &p, 5).map_err(|e| e.to_string())?;
    let a2 = synthgen::generate_agn(&g2, &p, 5).map_err(|e| e.to_string())?;
    ensure(a1 == a2, || "AGN differs".into())?;
    let q = OutliersParams::constant(8, 12, 0.2, 0.4).map_err(|e| e.to_string())?;
    let o1 = synthgen::generate_outliers(&g1, &q, 5).map_err(|e| e.to_string())?;
    let o2 = synthgen::generate_outliers(&g2, &q, 5).map_err(|e| e.to_string())?;
    ensure(o1 == o2, || "outliers differ".into())?;
    Ok("bitwise identical".into())
}

fn check_stack(a: &MeasurementStack) -> Result<(), String> {
    for (k, b) in a.blocks().iter().enumerate() {
        for i in 0..a.n() {
            ensure(b[(i, i)] == ZERO, || format!("block {k}: nonzero diagonal"))?;
            for j in 0..a.n() {
                ensure(b[(i, j)] == b[(j, i)].conj(), || format!("block {k}: not Hermitian"))?;
            }
        }
    }
    Ok(())
}

fn stack_invariants() -> Result<String, String> {
    for seed in 0..10 {
        let g = truth(6, 7, 1.0, seed);
        let p = AgnParams::new(6, 7, 2.0).map_err(|e| e.to_string())?;
        check_stack(&synthgen::generate_agn(&g, &p, seed).map_err(|e| e.to_string())?)?;
        let q = OutliersParams::constant(6, 7, 0.3, 0.5).map_err(|e| e.to_string())?;
        check_stack(&synthgen::generate_outliers(&g, &q, seed).map_err(|e| e.to_string())?)?;
    }
    Ok("20 stacks".into())
}

/// Mean of `‖P_{τ,n} X‖²_F` over `draws` noise stacks.
fn projected_energy(t: usize, n: usize, tau: usize, draws: u64, noise: impl Fn(u64) -> Vec<DMatrix<C64>>) -> Result<f64, String> {
    let proj = SmoothProjector::for_shape(t, tau, n).map_err(|e| e.to_string())?;
    let mut acc = 0.0;
    for d in 0..draws {
        acc += frob2(&proj.apply(&noise(d)).map_err(|e| e.to_string())?);
    }
    Ok(acc / draws as f64)
}

/// `‖P_{τ,n} W‖²_F / (n² τ)` for the AGN noise, per `τ`.
pub fn agn_variance_ratios(n: usize, t: usize, taus: &[usize], draws: u64) -> Result<Vec<f64>, String> {
    taus.iter()
        .map(|&tau| {
            let e = projected_energy(t, n, tau, draws, |d| synthgen::agn_noise(n, t, 1000 + d))?;
            Ok(e / (n * n * tau) as f64)
        })
        .collect()
}

/// `‖P_{τ,n} R‖²_F / (n² τ f)` for the centered outlier noise, per `τ`.
pub fn outliers_variance_ratios(n: usize, t: usize, eta: f64, p: f64, taus: &[usize], draws: u64) -> Result<Vec<f64>, String> {
    let g = truth(n, t, 1.0 / t as f64, 4242);
    let params = OutliersParams::constant(n, t, eta, p).map_err(|e| e.to_string())?;
    let f = synthgen::outlier_noise_stats(&params).f;
    taus.iter()
        .map(|&tau| {
            let e = projected_energy(t, n, tau, draws, |d| {
                let a = synthgen::generate_outliers(&g, &params, 2000 + d).expect("valid params");
                synthgen::outlier_residual(&a, &g, &params).expect("shapes agree")
            })?;
            Ok(e / ((n * n * tau) as f64 * f))
        })
        .collect()
}

fn agn_variance_scaling() -> Result<String, String> {
    let ratios = agn_variance_ratios(20, 50, &[1, 5, 25], 50)?;
    ensure(ratios.iter().all(|r| (0.5..=2.0).contains(r)), || format!("ratios {ratios:?}"))?;
    Ok(format!("ratios {:.3?}", ratios))
}

fn outliers_variance_scaling() -> Result<String, String> {
    let ratios = outliers_variance_ratios(20, 50, 0.2, 0.2, &[1, 5, 25], 50)?;
    ensure(ratios.iter().all(|r| *r > 0.0 && *r <= 10.0), || format!("ratios {ratios:?}"))?;
    Ok(format!("ratios {:.3?}", ratios))
}

/// Random TRS test instance of dimension `2..=12`, cycling through a generic
/// indefinite case, a negative definite case, an exact hard case, a hard case
/// with a repeated top eigenvalue and a near-hard case.
pub fn trs_test_instance(seed: u64) -> TrsProblem<DenseHermitian> {
    let mut r = rng::stream(seed, kind::SAMPLES, 0x7125);
    let m = 2 + (seed % 11) as usize;
    let a = DMatrix::from_fn(m, m, |_, _| rng::complex_normal(&mut r));
    let q = linalg::hermitianize(&(&a + a.adjoint())).symmetric_eigen().eigenvectors;
    let variant = seed % 5;
    let mut lam: Vec<f64> = (0..m).map(|_| 10.0 * rng::uniform(&mut r) - 5.0).collect();
    if variant == 1 {
        lam.iter_mut().for_each(|l| *l = -1.0 - l.abs());
    }
    lam.sort_by(|a, b| b.total_cmp(a));
    if variant == 3 && m >= 3 {
        lam[1] = lam[0];
    }
    let top = if variant == 3 && m >= 3 { 2 } else { 1 };
    let radius = 0.5 + 2.5 * rng::uniform(&mut r);
    let mut coef = random_vec(&mut r, m);
    match variant {
        2 | 3 => {
            coef.iter_mut().take(top).for_each(|c| *c = ZERO);
            // keep the limit point strictly inside the sphere
            let lim: f64 = (top..m).map(|i| coef[i].norm_sqr() / (lam[0] - lam[i]).powi(2)).sum::<f64>().sqrt();
            if lim > 0.0 {
                let s = 0.5 * radius / lim;
                coef.iter_mut().for_each(|c| *c *= s);
            }
        }
        4 => coef[0] *= 1e-6,
        _ => {}
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(m, lam.iter().map(|&l| C64::new(l, 0.0))));
    let b_mat = linalg::hermitianize(&(&q * d * q.adjoint()));
    let b: Vec<C64> = (0..m).map(|i| (0..m).map(|j| q[(i, j)] * coef[j]).sum()).collect();
    TrsProblem::dense(b_mat, b, radius).expect("valid instance")
}

fn op_norm(p: &TrsProblem<DenseHermitian>) -> f64 {
    p.op.0.clone().symmetric_eigen().eigenvalues.amax()
}

fn lambda_max(p: &TrsProblem<DenseHermitian>) -> f64 {
    p.op.0.clone().symmetric_eigen().eigenvalues.max()
}

/// Compares `solve_trs` with the dense oracle on one instance and checks the
/// solution invariants. Returns the relative objective gap.
pub fn trs_check_instance(p: &TrsProblem<DenseHermitian>) -> Result<f64, String> {
    let s = trs::solve_trs(p, 1e-10).map_err(|e| e.to_string())?;
    let o = trs::solve_trs_dense_oracle(p).map_err(|e| e.to_string())?;
    let rel = (s.objective - o.objective).abs() / o.objective.abs().max(1.0);
    ensure(rel <= 1e-6, || format!("objective {} vs oracle {}", s.objective, o.objective))?;
    let r = p.radius;
    let bn = op_norm(p);
    let nb = norm(&p.b);
    for (name, sol) in [("solver", &s), ("oracle", &o)] {
        ensure((norm(&sol.z) - r).abs() <= 1e-8 * r, || format!("{name}: off the sphere"))?;
        let kkt = p.kkt_residual(&sol.z, sol.multiplier);
        ensure(kkt <= 1e-6 * (bn * r + nb), || format!("{name}: KKT residual {kkt:e}"))?;
        ensure(sol.multiplier >= lambda_max(p) - 1e-6 * bn, || format!("{name}: multiplier below lambda_max"))?;
    }
    Ok(rel)
}

fn trs_oracle_agreement() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let rel = trs_check_instance(&trs_test_instance(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("100 instances, max relative gap {worst:.1e}"))
}

fn trs_phase_covariance() -> Result<String, String> {
    let mut r = samples(6);
    for seed in 0..20u64 {
        let p = trs_test_instance(seed * 5);
        let rot = C64::from_polar(1.0, std::f64::consts::TAU * rng::uniform(&mut r));
        let pr = TrsProblem::dense(p.op.0.clone(), p.b.iter().map(|z| z * rot).collect(), p.radius).map_err(|e| e.to_string())?;
        let a = trs::solve_trs(&p, 1e-12).map_err(|e| e.to_string())?;
        let b = trs::solve_trs(&pr, 1e-12).map_err(|e| e.to_string())?;
        let rotated: Vec<C64> = a.z.iter().map(|z| z * rot).collect();
        ensure(dist(&rotated, &b.z) <= 1e-7 * p.radius, || format!("seed {seed}: {:e}", dist(&rotated, &b.z)))?;
    }
    Ok("20 generic instances".into())
}

fn trs_secular_monotone() -> Result<String, String> {
    for seed in 0..10u64 {
        let p = trs_test_instance(seed * 5);
        let lmax = lambda_max(&p);
        let scale = op_norm(&p).max(1.0);
        let mut prev = f64::INFINITY;
        for i in 1..=30 {
            let mu = lmax + scale * (1e-3 * i as f64).powi(2) * 10.0;
            let v = trs::secular_norm(&p.op, &p.b, mu, 1e-14, 500).map_err(|e| e.to_string())?;
            ensure(v < prev, || format!("seed {seed}: not decreasing at mu={mu}"))?;
            prev = v;
        }
    }
    Ok("10 instances, 30 points each".into())
}

fn trs_beats_naive_point() -> Result<String, String> {
    for seed in 0..50 {
        let p = trs_test_instance(seed);
        let nb = norm(&p.b);
        if nb == 0.0 {
            continue;
        }
        let z0: Vec<C64> = p.b.iter().map(|z| z * (p.radius / nb)).collect();
        let s = trs::solve_trs(&p, 1e-10).map_err(|e| e.to_string())?;
        let f0 = p.objective(&z0);
        ensure(s.objective >= f0 - 1e-10 * f0.abs().max(1.0), || format!("seed {seed}: {} < {f0}", s.objective))?;
    }
    Ok("50 instances".into())
}

fn trs_real_embedding() -> Result<String, String> {
    let mut r = samples(7);
    for seed in 0..20 {
        let p = trs_test_instance(seed);
        let z = random_vec(&mut r, p.dim());
        let br = trs::real_embedding(&p.op.0);
        let zr = trs::real_embedding_vector(&z);
        let g = trs::real_embedding_vector(&p.b);
        let real = zr.dot(&(&br * &zr)) + 2.0 * g.dot(&zr);
        let cplx = p.objective(&z);
        ensure((real - cplx).abs() <= 1e-10 * cplx.abs().max(1.0), || format!("{real} vs {cplx}"))?;
    }
    Ok("20 instances".into())
}

fn noisy_instance(seed: u64) -> (StackedSignal, MeasurementStack) {
    let g = truth(8, 10, 0.1, seed);
    let a = synthgen::generate_agn(&g, &AgnParams::new(8, 10, 1.0).expect("valid"), seed).expect("valid");
    (g, a)
}

fn estimators_unit_anchored() -> Result<String, String> {
    let (g, a) = noisy_instance(11);
    for m in Method::ALL {
        let cfg = estimators::EstimatorConfig::new(m).with_lambda(5.0).with_tau(3).with_ppm_init(Method::GmdLtrs);
        let est = estimators::estimate(&a, &cfg).map_err(|e| format!("{m}: {e}"))?;
        ensure(est.is_anchored(), || format!("{m}: not anchored"))?;
        for b in est.blocks() {
            ensure(b.values().iter().all(|z| (z.norm() - 1.0).abs() <= signal::UNIT_TOL), || format!("{m}: off circle"))?;
        }
        let e = metrics::rmse(&est, &g).map_err(|e| e.to_string())?;
        ensure((0.0..=2.0).contains(&e), || format!("{m}: rmse {e}"))?;
    }
    Ok(format!("{} methods", Method::ALL.len()))
}

fn gmd_full_rank_is_local() -> Result<String, String> {
    let (_, a) = noisy_instance(12);
    let gmd = estimators::estimate_gmd_ltrs(&a, a.t()).map_err(|e| e.to_string())?;
    let local = estimators::estimate_ltrs_gs(&a, a.t()).map_err(|e| e.to_string())?;
    let d = dist(&gmd.flatten(), &local.flatten());
    ensure(d <= 1e-8, || format!("distance {d:e}"))?;
    Ok(format!("distance {d:.1e}"))
}

fn global_phase_consistency() -> Result<String, String> {
    let mut r = samples(8);
    let (n, t) = (8, 10);
    let g = truth(n, t, 0.1, 13);
    let rotated: Vec<signal::UnitSignal> = g
        .blocks()
        .iter()
        .map(|b| {
            let rot = C64::from_polar(1.0, std::f64::consts::TAU * rng::uniform(&mut r));
            signal::UnitSignal::normalized(b.values().iter().map(|z| z * rot).collect()).expect("unit")
        })
        .collect();
    let g_rot = StackedSignal::new(rotated).map_err(|e| e.to_string())?;
    let p = AgnParams::new(n, t, 1.0).map_err(|e| e.to_string())?;
    let a1 = synthgen::generate_agn(&g, &p, 3).map_err(|e| e.to_string())?;
    let a2 = synthgen::generate_agn(&g_rot, &p, 3).map_err(|e| e.to_string())?;
    let md = a1.blocks().iter().zip(a2.blocks()).map(|(x, y)| (x - y).camax()).fold(0.0, f64::max);
    ensure(md <= 1e-12, || format!("measurements differ by {md:e}"))?;
    let mut od = 0.0f64;
    for m in [Method::Gtrs, Method::LtrsGs, Method::GmdLtrs, Method::GmdSpectral, Method::NaiveSpectral] {
        let cfg = estimators::EstimatorConfig::new(m).with_lambda(5.0).with_tau(3);
        let e1 = estimators::estimate(&a1, &cfg).map_err(|e| e.to_string())?;
        let e2 = estimators::estimate(&a2, &cfg).map_err(|e| e.to_string())?;
        od = od.max(dist(&e1.flatten(), &e2.flatten()));
    }
    ensure(od <= 1e-8, || format!("outputs differ by {od:e}"))?;
    Ok(format!("measurements {md:.1e}, outputs {od:.1e}"))
}

fn hermitianize_contraction() -> Result<String, String> {
    for seed in 0..5 {
        let (g, a) = noisy_instance(20 + seed);
        let target = g.shifted_rank_one_blocks();
        for tau in [1, 3, 10] {
            let raw = SmoothProjector::for_shape(a.t(), tau, a.n())
                .and_then(|p| p.apply(a.blocks()))
                .map_err(|e| e.to_string())?;
            for (k, blk) in raw.iter().enumerate() {
                let h = linalg::hermitianize(blk);
                let before = (blk - &target[k]).norm();
                let after = (&h - &target[k]).norm();
                ensure(after <= before * (1.0 + 1e-12), || format!("block {k}: {after} > {before}"))?;
            }
        }
    }
    Ok("5 stacks x 3 tau".into())
}

fn fidelity_real() -> Result<String, String> {
    let mut r = samples(9);
    let (_, a) = noisy_instance(30);
    for _ in 0..20 {
        let g = random_signal(&mut r, a.n(), a.t());
        let mut total = ZERO;
        for k in 0..a.t() {
            let (tilde, b) = a.split(k);
            let gt = g.block(k).tail();
            total += linalg::quad_form(&tilde, gt) + dot(&b, gt) + dot(gt, &b);
        }
        ensure(total.im.abs() <= 1e-10 * total.re.abs().max(1.0), || format!("imaginary part {:e}", total.im))?;
        let f = selection::data_fidelity(&a, &g).map_err(|e| e.to_string())?;
        ensure((f - total.re).abs() <= 1e-10 * f.abs().max(1.0), || "fidelity mismatch".into())?;
    }
    Ok("20 signals".into())
}

fn grid_shape() -> Result<String, String> {
    for t in 1..=300 {
        let g = selection::build_beta_grid(t);
        let v = g.values();
        ensure(v.windows(2).all(|w| w[0] < w[1]), || format!("T={t}: not strictly sorted"))?;
        ensure(v[0] == 0.0 && *v.last().unwrap() == t as f64, || format!("T={t}: bad endpoints"))?;
    }
    Ok("T = 1..300".into())
}

fn selection_deterministic() -> Result<String, String> {
    let (_, a) = noisy_instance(31);
    let grid = selection::build_beta_grid(a.t());
    for m in [Method::Gtrs, Method::LtrsGs, Method::GmdLtrs, Method::GmdSpectral] {
        let rule = selection::SelectionRule::for_method(m);
        let run = || selection::select(&a, m, &grid, selection::DEFAULT_LAMBDA_SCALE, rule).map_err(|e| e.to_string());
        let (p1, i1) = run()?;
        let (p2, i2) = run()?;
        let same = i1 == i2 && p1.iter().zip(&p2).all(|(x, y)| x.fidelity.to_bits() == y.fidelity.to_bits() && x.estimate == y.estimate);
        ensure(same, || format!("{m}: repeated selection differs"))?;
    }
    Ok("4 methods".into())
}

fn rmse_metric() -> Result<String, String> {
    let mut r = samples(10);
    for _ in 0..50 {
        let (n, t) = (5, 6);
        let x = random_signal(&mut r, n, t);
        let y = random_signal(&mut r, n, t);
        let z = random_signal(&mut r, n, t);
        let e = |a: &StackedSignal, b: &StackedSignal| metrics::rmse(a, b).expect("same shape");
        ensure(e(&x, &x) == 0.0, || "rmse(x,x) != 0".into())?;
        ensure(e(&x, &y) == e(&y, &x), || "not symmetric".into())?;
        ensure(e(&x, &z) <= e(&x, &y) + e(&y, &z) + 1e-12, || "triangle inequality".into())?;
        ensure(e(&x, &y) <= 2.0, || "rmse above 2".into())?;
    }
    Ok("50 triples".into())
}

fn tau_star_range_monotone() -> Result<String, String> {
    let params = OutliersParams::constant(30, 100, 0.2, 0.2).map_err(|e| e.to_string())?;
    let stats = synthgen::outlier_noise_stats(&params);
    for t in [1, 7, 20, 100] {
        let mut prev_s = 0;
        for i in 0..40 {
            let s = 1e-3 * 1.5f64.powi(i);
            let a = metrics::tau_star_agn(30, t, s, 1.0);
            let o = metrics::tau_star_outliers(30, t, s, &stats, 1.0, 0.1);
            ensure((1..=t).contains(&a) && (1..=t).contains(&o), || format!("T={t}: out of range"))?;
            ensure(a >= prev_s, || format!("T={t}: not nondecreasing in s"))?;
            prev_s = a;
        }
        let mut prev_sigma = usize::MAX;
        for i in 0..40 {
            let sigma = 1e-2 * 1.4f64.powi(i);
            let a = metrics::tau_star_agn(30, t, 0.5, sigma);
            ensure(a <= prev_sigma, || format!("T={t}: not nonincreasing in sigma"))?;
            prev_sigma = a;
        }
    }
    Ok("T in {1,7,20,100}".into())
}

fn csv_reproducible() -> Result<String, String> {
    let cfg = ExperimentConfig {
        n: 5,
        t: vec![4, 6],
        sigma: vec![0.5],
        runs: 2,
        seed: 9,
        ..ExperimentConfig::default()
    };
    let render = |threads| -> Result<Vec<u8>, String> {
        let cfg = ExperimentConfig { threads, ..cfg.clone() };
        let recs = experiment::run_sweep_t(&cfg).map_err(|e| e.to_string())?;
        for r in &recs {
            let e = r.rmse.ok_or_else(|| format!("{}: {}", r.estimator, r.status))?;
            ensure((0.0..=2.0).contains(&e), || format!("rmse {e}"))?;
        }
        let mut buf = Vec::new();
        experiment::write_sweep_csv(&mut buf, &cfg, "sweep-t", &recs).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    ensure(render(None)? == render(Some(1))?, || "CSV differs between runs".into())?;
    Ok("bitwise identical".into())
}

fn config_echo() -> Result<String, String> {
    let cfg = ExperimentConfig {
        model: experiment::Model::Outliers,
        n: 4,
        t: vec![3],
        eta: vec![0.1, 0.3],
        p: 0.5,
        runs: 1,
        seed: 17,
        estimators: vec![Method::LtrsGs, Method::NaiveSpectral],
        selection: experiment::Selection::FixedTau(2),
        ..ExperimentConfig::default()
    };
    let recs = experiment::run_sweep_noise(&cfg).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    experiment::write_sweep_csv(&mut buf, &cfg, "sweep-noise", &recs).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    let header: String = text
        .lines()
        .skip(1)
        .map_while(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut back = ExperimentConfig::default();
    back.apply_text(&header).map_err(|e| e.to_string())?;
    ensure(back == cfg, || format!("echoed config differs: {back:?}"))?;
    Ok("round trip".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let failed: Vec<_> = run_all().into_iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
