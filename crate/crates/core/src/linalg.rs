//! Small complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result, C64};

/// Largest block size for which top eigenvectors use a dense eigensolve.
pub const DENSE_EIGEN_MAX_DIM: usize = 64;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 5000;

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `(M + M^H) / 2`
pub fn hermitianize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation `|M_ij - conj(M_ji)|`.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `y = M x` for a dense block.
pub fn matvec(m: &DMatrix<C64>, x: &[C64], y: &mut [C64]) {
    let (rows, cols) = m.shape();
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    // column-major storage: accumulate column by column
    for (j, xj) in x.iter().enumerate() {
        let col = m.column(j);
        for (yi, mij) in y.iter_mut().zip(col.iter()) {
            *yi += mij * xj;
        }
    }
}

/// `x^H M x`, real part only (exact for Hermitian `M`).
pub fn quad_form(m: &DMatrix<C64>, x: &[C64]) -> C64 {
    let mut y = vec![C64::new(0.0, 0.0); m.nrows()];
    matvec(m, x, &mut y);
    dot(x, &y)
}

/// Unit-norm eigenvector for the largest (algebraic) eigenvalue of a Hermitian
/// block, together with that eigenvalue.
///
/// Blocks up to [`DENSE_EIGEN_MAX_DIM`] use a dense Hermitian eigensolve;
/// larger blocks use shifted power iteration from a fixed start vector.
pub fn top_eigenpair(m: &DMatrix<C64>) -> Result<(f64, Vec<C64>)> {
    let n = m.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if n <= DENSE_EIGEN_MAX_DIM {
        return Ok(dense_top_eigenpair(m));
    }
    power_iteration(m, POWER_TOL, POWER_MAX_ITER).ok_or(Error::EigenNotConverged { block: 0 })
}

pub fn dense_top_eigenpair(m: &DMatrix<C64>) -> (f64, Vec<C64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut best = 0;
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        if *v > eig.eigenvalues[best] {
            best = i;
        }
    }
    let v: Vec<C64> = eig.eigenvectors.column(best).iter().copied().collect();
    (eig.eigenvalues[best], v)
}

/// Power iteration on `M + cI` with `c = ‖M‖_F`, so the dominant eigenvalue of
/// the shifted matrix is the largest algebraic eigenvalue of `M`.
///
/// Start vector: all ones plus a small index-dependent perturbation.
/// Returns `None` when the residual `‖Mv - θv‖` stays above
/// `tol * max(‖M‖_F, 1)` for `max_iter` iterations.
pub fn power_iteration(m: &DMatrix<C64>, tol: f64, max_iter: usize) -> Option<(f64, Vec<C64>)> {
    let n = m.nrows();
    let shift = m.norm();
    let scale_ref = shift.max(1.0);
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 1e-3 * (i as f64 + 1.0) / n as f64, 0.0))
        .collect();
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);
    let mut mv = vec![C64::new(0.0, 0.0); n];
    for _ in 0..max_iter {
        matvec(m, &v, &mut mv);
        let theta = dot(&v, &mv).re;
        let resid = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid <= tol * scale_ref {
            return Some((theta, v));
        }
        for (vi, mvi) in v.iter_mut().zip(&mv) {
            *vi = mvi + *vi * shift;
        }
        let nv = norm(&v);
        if nv == 0.0 {
            return None;
        }
        scale(1.0 / nv, &mut v);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitianize_is_noop_on_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.2), c(0.5, -0.2), c(-1.0, 0.0)]);
        assert_eq!(hermitianize(&m), m);
        assert_eq!(hermitian_deviation(&m), 0.0);
    }

    #[test]
    fn power_iteration_matches_dense() {
        let g = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.6, 0.8)];
        let n = g.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { c(0.0, 0.0) } else { g[i] * g[j].conj() });
        let (l1, v1) = power_iteration(&m, 1e-12, 10_000).unwrap();
        let (l2, v2) = dense_top_eigenpair(&m);
        assert!((l1 - 3.0).abs() < 1e-9);
        assert!((l2 - 3.0).abs() < 1e-9);
        // same line up to phase
        assert!((dot(&v1, &v2).norm() - 1.0).abs() < 1e-9);
    }
}
