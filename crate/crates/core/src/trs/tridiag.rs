//! Symmetric tridiagonal helpers for the Lanczos projections.
//!
//! `a` is the diagonal (length `k`) and `e` the off-diagonal (length `k-1`).

pub(crate) fn gershgorin(a: &[f64], e: &[f64]) -> (f64, f64) {
    let k = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < k { e[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - left - right);
        hi = hi.max(a[i] + left + right);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence).
pub(crate) fn count_below(a: &[f64], e: &[f64], x: f64) -> usize {
    let scale = a.iter().chain(e).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE.sqrt() * scale;
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..a.len() {
        d = if i == 0 { a[0] - x } else { a[i] - x - e[i - 1] * e[i - 1] / d };
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bracket `[lo, hi]` around the largest eigenvalue, with `hi` strictly above
/// it and `hi - lo` at the level of rounding.
pub(crate) fn max_eigenvalue(a: &[f64], e: &[f64]) -> (f64, f64) {
    let k = a.len();
    let (glo, ghi) = gershgorin(a, e);
    let pad = f64::EPSILON * glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let mut lo = glo - pad;
    let mut hi = ghi + pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(a, e, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
pub(crate) fn min_eigenvalue(a: &[f64], e: &[f64]) -> f64 {
    let (glo, ghi) = gershgorin(a, e);
    let pad = f64::EPSILON * glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let mut lo = glo - pad;
    let mut hi = ghi + pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(a, e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(mu I - T) y = rhs`. Returns `None` unless every pivot is positive,
/// i.e. unless `mu I - T` is numerically positive definite.
pub(crate) fn shifted_solve(a: &[f64], e: &[f64], mu: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let k = a.len();
    let mut d = vec![0.0; k];
    let mut l = vec![0.0; k];
    let mut y = rhs.to_vec();
    for i in 0..k {
        let off = if i > 0 { -e[i - 1] } else { 0.0 };
        d[i] = mu - a[i] - if i > 0 { l[i] * off } else { 0.0 };
        if !(d[i] > 0.0) {
            return None;
        }
        if i > 0 {
            y[i] -= l[i] * y[i - 1];
        }
        if i + 1 < k {
            l[i + 1] = -e[i] / d[i];
        }
    }
    for i in (0..k).rev() {
        y[i] /= d[i];
        if i + 1 < k {
            let yn = y[i + 1];
            y[i] -= l[i + 1] * yn;
        }
    }
    Some(y)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigenvector for the largest eigenvalue, by inverse iteration with the
/// shift `shift` placed just above it.
pub(crate) fn top_eigenvector(a: &[f64], e: &[f64], shift: f64) -> Vec<f64> {
    let k = a.len();
    let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0) / k as f64).collect();
    let mut shift = shift;
    for _ in 0..4 {
        let y = loop {
            match shifted_solve(a, e, shift, &x) {
                Some(y) if y.iter().all(|v| v.is_finite()) => break y,
                _ => shift += f64::EPSILON * shift.abs().max(1.0) * 16.0,
            }
        };
        let nrm = norm(&y);
        x = y.into_iter().map(|v| v / nrm).collect();
    }
    x
}

/// Secular equation for `max h^T T h + 2 c h_1` on `‖h‖ = r`: returns `mu`
/// and `h = (mu I - T)^{-1} c e_1` with `mu` above the spectrum of `T` and
/// `‖h‖ = r`. When no such root exists numerically, `mu` sits at the top of
/// the spectrum and `‖h‖ < r`.
pub(crate) fn secular_solve(a: &[f64], e: &[f64], c: f64, r: f64) -> (f64, Vec<f64>) {
    let k = a.len();
    let mut rhs = vec![0.0; k];
    rhs[0] = c;
    let (_, top) = max_eigenvalue(a, e);
    let mut lo = top;
    let mut hi = top + c / r;
    let mut mu = hi;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..300 {
        match shifted_solve(a, e, mu, &rhs) {
            None => lo = mu,
            Some(h) => {
                let nh = norm(&h);
                let phi = 1.0 / nh - 1.0 / r;
                if phi < 0.0 {
                    lo = mu;
                } else {
                    hi = mu;
                }
                let done = (nh - r).abs() <= 4.0 * f64::EPSILON * r;
                let w = shifted_solve(a, e, mu, &h);
                best = Some((mu, h));
                if done {
                    break;
                }
                if let Some(w) = w {
                    let hw: f64 = best.as_ref().unwrap().1.iter().zip(&w).map(|(x, y)| x * y).sum();
                    let dphi = hw / (nh * nh * nh);
                    let next = mu - phi / dphi;
                    if next > lo && next < hi && next.is_finite() {
                        mu = next;
                        continue;
                    }
                }
            }
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        mu = mid;
    }
    match best {
        Some(b) => b,
        None => {
            // mu I - T never factored: degenerate tiny bracket; take the top
            let mut mu = hi;
            loop {
                if let Some(h) = shifted_solve(a, e, mu, &rhs) {
                    return (mu, h);
                }
                mu += f64::EPSILON * mu.abs().max(1.0) * 16.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense(a: &[f64], e: &[f64]) -> DMatrix<f64> {
        let k = a.len();
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                a[i]
            } else if i + 1 == j {
                e[i]
            } else if j + 1 == i {
                e[j]
            } else {
                0.0
            }
        })
    }

    fn sample() -> (Vec<f64>, Vec<f64>) {
        (vec![1.0, -2.0, 0.5, 3.0, 0.0], vec![0.7, -1.1, 0.3, 2.0])
    }

    #[test]
    fn sturm_bisection_matches_dense() {
        let (a, e) = sample();
        let eig = SymmetricEigen::new(dense(&a, &e)).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        let (lo, hi) = max_eigenvalue(&a, &e);
        assert!(lo <= max + 1e-14 && max < hi + 1e-14 && hi - lo < 1e-13, "{lo} {max} {hi}");
        assert!((min_eigenvalue(&a, &e) - min).abs() < 1e-13);
        assert_eq!(count_below(&a, &e, 0.0), eig.iter().filter(|&&x| x < 0.0).count());
    }

    #[test]
    fn shifted_solve_and_eigenvector() {
        let (a, e) = sample();
        let t = dense(&a, &e);
        let rhs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = shifted_solve(&a, &e, 10.0, &rhs).unwrap();
        let m = DMatrix::identity(5, 5) * 10.0 - &t;
        let back = m * nalgebra::DVector::from_column_slice(&y);
        for i in 0..5 {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
        assert!(shifted_solve(&a, &e, 0.0, &rhs).is_none());
        let (lo, hi) = max_eigenvalue(&a, &e);
        let v = top_eigenvector(&a, &e, hi);
        let tv = &t * nalgebra::DVector::from_column_slice(&v);
        for i in 0..5 {
            assert!((tv[i] - lo * v[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn secular_root_hits_radius() {
        let (a, e) = sample();
        let (mu, h) = secular_solve(&a, &e, 2.0, 1.5);
        assert!((norm(&h) - 1.5).abs() < 1e-12);
        assert!(mu > max_eigenvalue(&a, &e).0);
    }
}
