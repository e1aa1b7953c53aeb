//! Error metrics and the theory-derived oracles for `τ*` and the bias.

use std::f64::consts::PI;

use crate::signal::{smoothness_of, StackedSignal};
use crate::spectral::SmoothProjector;
use crate::synthgen::OutlierNoiseStats;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rmse: f64,
    pub mse: f64,
    pub per_block_l2: Vec<f64>,
}

fn check_shapes(a: &StackedSignal, b: &StackedSignal) -> Result<()> {
    if a.n() != b.n() || a.t() != b.t() {
        return Err(Error::Shape(format!(
            "estimate is n={}, T={} but truth is n={}, T={}",
            a.n(),
            a.t(),
            b.n(),
            b.t()
        )));
    }
    Ok(())
}

pub fn error_report(est: &StackedSignal, truth: &StackedSignal) -> Result<ErrorReport> {
    check_shapes(est, truth)?;
    let per_block_l2: Vec<f64> = est
        .blocks()
        .iter()
        .zip(truth.blocks())
        .map(|(a, b)| crate::linalg::dist(a.values(), b.values()))
        .collect();
    let total: f64 = per_block_l2.iter().map(|x| x * x).sum();
    let t = est.t() as f64;
    Ok(ErrorReport {
        rmse: (total / (est.n() as f64 * t)).sqrt(),
        mse: total / t,
        per_block_l2,
    })
}

/// `‖ĝ - g*‖ / √(nT)` without any phase alignment.
pub fn rmse(est: &StackedSignal, truth: &StackedSignal) -> Result<f64> {
    check_shapes(est, truth)?;
    let total: f64 = est
        .blocks()
        .iter()
        .zip(truth.blocks())
        .map(|(a, b)| crate::linalg::dist(a.values(), b.values()).powi(2))
        .sum();
    Ok((total / (est.n() * est.t()) as f64).sqrt())
}

fn tau_from(x: f64, t: usize) -> usize {
    if !x.is_finite() {
        return t;
    }
    let f = x.cbrt().floor();
    if f >= t as f64 {
        t
    } else {
        (1 + f as usize).min(t)
    }
}

/// `min(1 + ⌊(T² s / (n σ²))^{1/3}⌋, T)`; `σ = 0 → T`, `s = 0 → 1`.
pub fn tau_star_agn(n: usize, t: usize, s: f64, sigma: f64) -> usize {
    if s == 0.0 {
        1
    } else if sigma == 0.0 {
        t
    } else {
        let tt = t as f64;
        tau_from(tt * tt * s / (n as f64 * sigma * sigma), t)
    }
}

/// `f + Q² log(1/δ)`
pub fn f_tilde(stats: &OutlierNoiseStats, delta: f64) -> f64 {
    stats.f + stats.q * stats.q * (1.0 / delta).ln()
}

/// `min(1 + ⌊(μ d̄² T² s / (n f̃))^{1/3}⌋, T)`; `s = 0 → 1`, `f̃ = 0 → T`.
pub fn tau_star_outliers(n: usize, t: usize, s: f64, stats: &OutlierNoiseStats, mu: f64, delta: f64) -> usize {
    let ft = f_tilde(stats, delta);
    if s == 0.0 {
        1
    } else if ft == 0.0 {
        t
    } else {
        let tt = t as f64;
        tau_from(mu * stats.d_bar * stats.d_bar * tt * tt * s / (n as f64 * ft), t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasDiagnostic {
    /// `‖P⊥_{τ,n}(G* - 1_T ⊗ I_n)‖²_F`
    pub measured: f64,
    /// `(20 n / π²) T² ŝ / τ²` for `τ < T`, else 0.
    pub bound: f64,
}

pub fn bias_diagnostic(truth: &StackedSignal, tau: usize) -> Result<BiasDiagnostic> {
    let (n, t) = (truth.n(), truth.t());
    let proj = SmoothProjector::for_shape(t, tau, n)?;
    let measured = proj
        .apply_complement(&truth.shifted_rank_one_blocks())?
        .iter()
        .map(|b| b.norm_squared())
        .sum();
    let bound = if tau < t {
        let (tt, tau) = (t as f64, tau as f64);
        20.0 * n as f64 / (PI * PI) * tt * tt * smoothness_of(truth) / (tau * tau)
    } else {
        0.0
    };
    Ok(BiasDiagnostic { measured, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_smooth_truth, outlier_noise_stats, GroundTruthSpec, OutliersParams};
    use crate::C64;

    #[test]
    fn rmse_small_cases() {
        let g = StackedSignal::from_tails(3, &[C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::from_polar(1.0, 0.3), C64::new(1.0, 0.0)]).unwrap();
        assert_eq!(rmse(&g, &g).unwrap(), 0.0);
        let conj = StackedSignal::from_tails(3, &[C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::from_polar(1.0, -0.3), C64::new(1.0, 0.0)]).unwrap();
        // |i - (-i)|² = 4, |e^{0.3i} - e^{-0.3i}|² = 4 sin²(0.3)
        let want = ((4.0 + 4.0 * 0.3f64.sin().powi(2)) / 6.0).sqrt();
        assert!((rmse(&conj, &g).unwrap() - want).abs() < 1e-15);
        let rep = error_report(&conj, &g).unwrap();
        assert!((rep.rmse - want).abs() < 1e-15);
        assert!((rep.mse - rep.per_block_l2.iter().map(|x| x * x).sum::<f64>() / 2.0).abs() < 1e-15);
        let other = StackedSignal::from_tails(2, &[C64::new(1.0, 0.0)]).unwrap();
        assert!(rmse(&other, &g).is_err());
    }

    #[test]
    fn tau_star_agn_examples() {
        assert_eq!(tau_star_agn(30, 100, 0.01, 0.0), 100);
        assert_eq!(tau_star_agn(30, 100, 0.0, 3.0), 1);
        assert_eq!(tau_star_agn(30, 100, 0.01, 3.0), 1);
        // (10⁴·1/(30·0.01))^{1/3} = 33333^{1/3} ≈ 32.18
        assert_eq!(tau_star_agn(30, 100, 1.0, 0.1), 33);
        assert_eq!(tau_star_agn(1, 10, 1e9, 1e-3), 10);
    }

    #[test]
    fn tau_star_outliers_examples() {
        let clean = outlier_noise_stats(&OutliersParams::constant(30, 100, 0.0, 1.0).unwrap());
        assert_eq!(tau_star_outliers(30, 100, 0.01, &clean, 1.0, 0.1), 100);
        let noisy = outlier_noise_stats(&OutliersParams::constant(30, 100, 0.2, 0.2).unwrap());
        assert_eq!(tau_star_outliers(30, 100, 0.0, &noisy, 1.0, 0.1), 1);
        assert_eq!(tau_star_outliers(30, 100, 0.01, &noisy, 1.0, 0.1), TAU_STAR_OUTLIERS_REGRESSION);
    }

    /// Direct evaluation for η = p = 0.2, n = 30, T = 100, s = 0.01, μ = 1,
    /// δ = 0.1, frozen.
    const TAU_STAR_OUTLIERS_REGRESSION: usize = 1;

    #[test]
    fn bias_examples() {
        let g = generate_smooth_truth(&GroundTruthSpec { n: 5, t: 12, s_target: 0.5, seed: 2 }).unwrap();
        let full = bias_diagnostic(&g, 12).unwrap();
        assert!(full.measured < 1e-20);
        assert_eq!(full.bound, 0.0);
        let flat = generate_smooth_truth(&GroundTruthSpec { n: 5, t: 12, s_target: 0.0, seed: 2 }).unwrap();
        for tau in 1..=12 {
            assert!(bias_diagnostic(&flat, tau).unwrap().measured < 1e-20);
        }
        for tau in 1..12 {
            let d = bias_diagnostic(&g, tau).unwrap();
            assert!(d.measured <= d.bound);
        }
    }

    mod props {
        use super::*;
        use crate::signal::StackedSignal;
        use proptest::prelude::*;

        fn signal(n: usize, t: usize) -> impl Strategy<Value = StackedSignal> {
            proptest::collection::vec(0.0f64..std::f64::consts::TAU, (n - 1) * t).prop_map(move |a| {
                let tails: Vec<C64> = a.into_iter().map(|x| C64::from_polar(1.0, x)).collect();
                StackedSignal::from_tails(n, &tails).unwrap()
            })
        }

        proptest! {
            #[test]
            fn rmse_is_a_metric(x in signal(4, 3), y in signal(4, 3), z in signal(4, 3)) {
                prop_assert_eq!(rmse(&x, &x).unwrap(), 0.0);
                prop_assert_eq!(rmse(&x, &y).unwrap(), rmse(&y, &x).unwrap());
                prop_assert!(rmse(&x, &z).unwrap() <= rmse(&x, &y).unwrap() + rmse(&y, &z).unwrap() + 1e-12);
                prop_assert!(rmse(&x, &y).unwrap() <= 2.0);
            }

            #[test]
            fn tau_star_agn_is_monotone(t in 1usize..200, s in 1e-4f64..10.0, ds in 0.0f64..5.0, sigma in 1e-2f64..10.0, dsigma in 0.0f64..5.0) {
                let base = tau_star_agn(30, t, s, sigma);
                prop_assert!((1..=t).contains(&base));
                prop_assert!(tau_star_agn(30, t, s + ds, sigma) >= base);
                prop_assert!(tau_star_agn(30, t, s, sigma + dsigma) <= base);
            }
        }
    }
}
