//! Sphere-constrained complex quadratic maximization
//!
//! ```text
//! max  z^H B z + 2 Re(b^H z)   subject to  ‖z‖ = r
//! ```
//!
//! with `B` Hermitian and possibly indefinite. The optimum satisfies
//! `(μ I - B) z = b` with `μ ≥ λ_max(B)`; the second condition certifies
//! global optimality.
//!
//! [`solve_trs`] only touches `B` through matrix-vector products. It projects
//! the problem onto the Krylov space generated from `b` with Lanczos, solves
//! the secular equation `‖(μ I - T_k)^{-1} ‖b‖ e_1‖ = r` on the tridiagonal
//! projection, then checks `μ` against an independent Lanczos estimate of
//! `λ_max(B)`. When the check fails (the hard case, or a linear term nearly
//! orthogonal to the top eigenspace) the subspace is enlarged with the top
//! eigenvector and successive residuals until the KKT residual is small.
//!
//! [`solve_trs_dense_oracle`] is an independent dense solver on the real
//! embedding, for testing.

mod lanczos;
mod oracle;
mod tridiag;

use nalgebra::{DMatrix, SymmetricEigen};

pub use oracle::{real_embedding, real_embedding_vector, solve_trs_dense_oracle, ORACLE_MAX_DIM};

use crate::linalg::{self, axpy, dot, norm};
use crate::rng::{self, kind};
use crate::{Error, Result, C64};
use lanczos::Lanczos;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Hermitian linear map given by its action.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;

    /// `y ← B x`
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn dense(&self) -> Option<DMatrix<C64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHermitian(pub DMatrix<C64>);

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        linalg::matvec(&self.0, x, y);
    }

    fn dense(&self) -> Option<DMatrix<C64>> {
        Some(self.0.clone())
    }
}

#[derive(Debug, Clone)]
pub struct TrsProblem<O: HermitianOperator> {
    pub op: O,
    pub b: Vec<C64>,
    pub radius: f64,
}

impl<O: HermitianOperator> TrsProblem<O> {
    pub fn new(op: O, b: Vec<C64>, radius: f64) -> Result<Self> {
        if b.len() != op.dim() || op.dim() == 0 {
            return Err(Error::Shape(format!("operator dim {} but b has length {}", op.dim(), b.len())));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
        }
        if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("linear term has non-finite entries".into()));
        }
        if let Some(m) = op.dense() {
            let dev = linalg::hermitian_deviation(&m);
            let scale = m.iter().fold(1.0f64, |s, z| s.max(z.norm()));
            if !(dev <= 1e-10 * scale) {
                return Err(Error::NotHermitian { block: 0, deviation: dev });
            }
        }
        Ok(Self { op, b, radius })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `z^H B z + 2 Re(b^H z)`
    pub fn objective(&self, z: &[C64]) -> f64 {
        let mut bz = vec![ZERO; z.len()];
        self.op.apply(z, &mut bz);
        dot(z, &bz).re + 2.0 * dot(&self.b, z).re
    }

    /// `‖B z + b - μ z‖`
    pub fn kkt_residual(&self, z: &[C64], mu: f64) -> f64 {
        let mut r = vec![ZERO; z.len()];
        self.op.apply(z, &mut r);
        axpy(C64::new(1.0, 0.0), &self.b, &mut r);
        axpy(C64::new(-mu, 0.0), z, &mut r);
        norm(&r)
    }
}

impl TrsProblem<DenseHermitian> {
    pub fn dense(b_mat: DMatrix<C64>, b: Vec<C64>, radius: f64) -> Result<Self> {
        if !b_mat.is_square() {
            return Err(Error::Shape("quadratic term must be square".into()));
        }
        Self::new(DenseHermitian(b_mat), b, radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrsStatus {
    /// `B ∝ I` and `b = 0`: every point of the sphere is optimal.
    InteriorFree,
    /// Regular case, `μ > λ_max(B)`.
    Boundary,
    /// `μ = λ_max(B)` and the solution needs a top-eigenvector component.
    HardCase,
}

impl TrsStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrsStatus::InteriorFree => "interior-free",
            TrsStatus::Boundary => "boundary",
            TrsStatus::HardCase => "hard-case",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrsSolution {
    pub z: Vec<C64>,
    pub multiplier: f64,
    pub objective: f64,
    pub status: TrsStatus,
    /// `‖B z + b - μ z‖`
    pub residual: f64,
    /// Operator applications.
    pub iterations: usize,
    /// Estimate of `λ_max(B)` used for the certificate.
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrsOptions {
    /// Relative KKT tolerance: stop when `‖Bz + b - μz‖ ≤ tol·(‖B‖ r + ‖b‖)`.
    pub tol: f64,
    /// Lanczos steps per Krylov sequence.
    pub max_iter: usize,
    /// Residual-driven subspace expansions after a failed certificate.
    pub max_expansions: usize,
    /// Seeds the start vector of the `λ_max` estimate.
    pub seed: u64,
}

impl Default for TrsOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, max_expansions: 100, seed: 0x7125 }
    }
}

pub fn solve_trs<O: HermitianOperator>(p: &TrsProblem<O>, tol: f64) -> Result<TrsSolution> {
    solve_trs_with(p, &TrsOptions { tol, ..TrsOptions::default() })
}

struct TopPair {
    value: f64,
    vector: Vec<C64>,
    scale: f64,
    matvecs: usize,
    first_step_invariant: bool,
}

/// Lanczos estimate of `λ_max(B)` from a seeded random start, run until the
/// Ritz residual is below `1e-8 ‖B‖` or the Ritz value stops moving.
fn top_eigenpair<O: HermitianOperator + ?Sized>(op: &O, seed: u64, max_iter: usize) -> TopPair {
    let m = op.dim();
    let mut r = rng::stream(seed, kind::START_VECTOR, m as u64);
    let start: Vec<C64> = (0..m).map(|_| rng::complex_normal(&mut r)).collect();
    let mut lz = Lanczos::new(op, &start);
    let mut prev = f64::NEG_INFINITY;
    let mut scale = 0.0f64;
    loop {
        let k = lz.steps();
        let bt = 1e-14 * scale.max(lz.alpha.last().map_or(0.0, |a| a.abs()));
        let more = lz.step(bt.max(f64::MIN_POSITIVE));
        let k = k + 1;
        let (a, e) = lz.tridiagonal();
        let (glo, ghi) = tridiag::gershgorin(a, e);
        scale = scale.max(glo.abs()).max(ghi.abs());
        let last = !more || k >= max_iter;
        if last || k <= 10 || k % (k / 10).max(5) == 0 {
            let (lo, hi) = tridiag::max_eigenvalue(a, e);
            let s = tridiag::top_eigenvector(a, e, hi);
            let res = if more { lz.last_beta() * s[k - 1].abs() } else { 0.0 };
            let theta = lo;
            let stalled = theta - prev <= 1e-13 * scale;
            prev = theta;
            if last || res <= 1e-8 * scale || stalled {
                let v = lz.combine(&s);
                let nv = norm(&v);
                let vector = v.into_iter().map(|z| z / nv).collect();
                return TopPair {
                    value: theta,
                    vector,
                    scale: scale.max(theta.abs()),
                    matvecs: k,
                    first_step_invariant: !more && k == 1 && m > 1,
                };
            }
        }
    }
}

pub fn solve_trs_with<O: HermitianOperator>(p: &TrsProblem<O>, opts: &TrsOptions) -> Result<TrsSolution> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-2) {
        return Err(Error::InvalidArgument(format!("TRS tolerance {} outside (0, 1e-2]", opts.tol)));
    }
    let m = p.dim();
    let r = p.radius;
    let bnorm = norm(&p.b);
    let max_iter = opts.max_iter.min(m).max(1);

    let mut matvecs = 0;
    let mut lz: Option<Lanczos<'_, O>> = None;
    let mut krylov: Option<(f64, Vec<f64>)> = None;
    let mut scale = 0.0f64;
    let mut converged = false;

    if bnorm > 0.0 {
        let mut l = Lanczos::new(&p.op, &p.b);
        loop {
            let more = l.step(1e-14 * scale.max(f64::MIN_POSITIVE));
            let k = l.steps();
            let (a, e) = l.tridiagonal();
            let (glo, ghi) = tridiag::gershgorin(a, e);
            scale = scale.max(glo.abs()).max(ghi.abs());
            let last = !more || k >= max_iter;
            if last || k <= 10 || k % (k / 10).max(5) == 0 {
                let (mu, h) = tridiag::secular_solve(a, e, bnorm, r);
                let res = if more { l.last_beta() * h[k - 1].abs() } else { 0.0 };
                krylov = Some((mu, h));
                if res <= opts.tol * (scale * r + bnorm) {
                    converged = true;
                    break;
                }
                if last {
                    break;
                }
            }
        }
        matvecs += l.steps();
        lz = Some(l);
    }

    let top = top_eigenpair(&p.op, opts.seed, max_iter);
    matvecs += top.matvecs;
    scale = scale.max(top.scale).max(f64::MIN_POSITIVE);
    let tol_res = opts.tol * (scale * r + bnorm);

    if bnorm == 0.0 && top.first_step_invariant {
        let z: Vec<C64> = top.vector.iter().map(|v| v * r).collect();
        return Ok(finish(p, z, top.value, TrsStatus::InteriorFree, matvecs, top.value));
    }

    if let (Some(l), Some((mu, h))) = (&lz, &krylov) {
        if *mu > top.value + 1e-9 * scale {
            let z = l.combine(h);
            let sol = finish(p, z, *mu, TrsStatus::Boundary, matvecs, top.value);
            if converged && sol.residual <= 10.0 * tol_res {
                return Ok(sol);
            }
            if !converged {
                return Err(Error::TrsNotConverged { iterations: matvecs, residual: sol.residual, best: Box::new(sol) });
            }
        }
    }

    expand(p, lz.as_ref(), &top, tol_res, opts, matvecs)
}

fn finish<O: HermitianOperator>(
    p: &TrsProblem<O>,
    mut z: Vec<C64>,
    mu: f64,
    status: TrsStatus,
    matvecs: usize,
    lambda_max: f64,
) -> TrsSolution {
    let nz = norm(&z);
    if nz > 0.0 {
        let s = p.radius / nz;
        z.iter_mut().for_each(|v| *v *= s);
    }
    let mut bz = vec![ZERO; z.len()];
    p.op.apply(&z, &mut bz);
    let objective = dot(&z, &bz).re + 2.0 * dot(&p.b, &z).re;
    axpy(C64::new(1.0, 0.0), &p.b, &mut bz);
    axpy(C64::new(-mu, 0.0), &z, &mut bz);
    TrsSolution {
        residual: norm(&bz),
        z,
        multiplier: mu,
        objective,
        status,
        iterations: matvecs + 1,
        lambda_max,
    }
}

fn orthogonalize(v: &mut [C64], bases: &[&[Vec<C64>]]) -> f64 {
    for _ in 0..2 {
        for basis in bases {
            for q in basis.iter() {
                let c = dot(q, v);
                axpy(-c, q, v);
            }
        }
    }
    norm(v)
}

/// Rayleigh–Ritz on `[Q, X]` where `Q` is the Krylov basis from `b` and `X`
/// starts with the top eigenvector estimate and grows with KKT residuals.
fn expand<O: HermitianOperator>(
    p: &TrsProblem<O>,
    lz: Option<&Lanczos<'_, O>>,
    top: &TopPair,
    tol_res: f64,
    opts: &TrsOptions,
    mut matvecs: usize,
) -> Result<TrsSolution> {
    let m = p.dim();
    let bnorm = norm(&p.b);
    let empty: Vec<Vec<C64>> = Vec::new();
    let q: &[Vec<C64>] = lz.map_or(&empty[..], |l| &l.q[..]);
    let (ta, te) = lz.map_or((&[][..], &[][..]), |l| l.tridiagonal());
    let k = q.len();
    let tail = lz.and_then(|l| l.next_vector().map(|v| (l.last_beta(), v)));

    let mut xs: Vec<Vec<C64>> = Vec::new();
    let mut bxs: Vec<Vec<C64>> = Vec::new();
    let mut candidate = top.vector.clone();
    let mut best: Option<TrsSolution> = None;

    for _ in 0..=opts.max_expansions {
        let n0 = norm(&candidate);
        let nc = orthogonalize(&mut candidate, &[q, &xs]);
        if nc > 1e-8 * n0 && xs.len() + k < m {
            candidate.iter_mut().for_each(|z| *z /= nc);
            let mut bx = vec![ZERO; m];
            p.op.apply(&candidate, &mut bx);
            matvecs += 1;
            xs.push(std::mem::take(&mut candidate));
            bxs.push(bx);
        } else if best.is_some() {
            break;
        }

        let d = k + xs.len();
        let mut h = DMatrix::from_element(d, d, ZERO);
        for i in 0..k {
            h[(i, i)] = C64::new(ta[i], 0.0);
            if i + 1 < k {
                h[(i, i + 1)] = C64::new(te[i], 0.0);
                h[(i + 1, i)] = C64::new(te[i], 0.0);
            }
        }
        for (j, bx) in bxs.iter().enumerate() {
            for (i, qi) in q.iter().enumerate() {
                let v = dot(qi, bx);
                h[(i, k + j)] = v;
                h[(k + j, i)] = v.conj();
            }
            for (i, xi) in xs.iter().enumerate() {
                h[(k + i, k + j)] = dot(xi, bx);
            }
        }
        let h = linalg::hermitianize(&h);
        let mut c = vec![ZERO; d];
        if k > 0 {
            c[0] = C64::new(bnorm, 0.0);
        }
        let (mu, y, hard) = small_dense_trs(&h, &c, p.radius);

        let mut z = vec![ZERO; m];
        let mut bz = vec![ZERO; m];
        if k > 0 {
            let yq = &y[..k];
            for i in 0..k {
                axpy(yq[i], &q[i], &mut z);
                let mut ty = yq[i] * ta[i];
                if i > 0 {
                    ty += yq[i - 1] * te[i - 1];
                }
                if i + 1 < k {
                    ty += yq[i + 1] * te[i];
                }
                axpy(ty, &q[i], &mut bz);
            }
            if let Some((beta, qn)) = tail {
                axpy(yq[k - 1] * beta, qn, &mut bz);
            }
        }
        for (j, (x, bx)) in xs.iter().zip(&bxs).enumerate() {
            axpy(y[k + j], x, &mut z);
            axpy(y[k + j], bx, &mut bz);
        }
        let mut res = bz;
        axpy(C64::new(1.0, 0.0), &p.b, &mut res);
        axpy(C64::new(-mu, 0.0), &z, &mut res);
        let rn = norm(&res);

        let status = if hard { TrsStatus::HardCase } else { TrsStatus::Boundary };
        let sol = finish(p, z, mu, status, matvecs, top.value);
        let done = rn <= tol_res && sol.residual <= 10.0 * tol_res;
        if best.as_ref().map_or(true, |b| sol.residual < b.residual) {
            best = Some(sol);
        }
        if done {
            return Ok(best.unwrap());
        }
        candidate = res;
    }
    let best = best.expect("at least one Rayleigh-Ritz step");
    Err(Error::TrsNotConverged { iterations: matvecs, residual: best.residual, best: Box::new(best) })
}

/// Dense TRS on a small Hermitian matrix via its eigendecomposition. Returns
/// `(μ, y, hard_case)`.
fn small_dense_trs(h: &DMatrix<C64>, c: &[C64], r: f64) -> (f64, Vec<C64>, bool) {
    let d = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let u = &eig.eigenvectors;
    let gamma: Vec<C64> = (0..d).map(|i| (0..d).map(|j| u[(j, i)].conj() * c[j]).sum()).collect();
    let cn = norm(c);
    let top = (0..d).fold(0, |b, i| if lam[i] > lam[b] { i } else { b });
    let l1 = lam[top];
    let scale = lam.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(f64::MIN_POSITIVE);
    let in_top = |i: usize| lam[i] >= l1 - 1e-9 * scale;
    let top_mass = (0..d).filter(|&i| in_top(i)).map(|i| gamma[i].norm_sqr()).sum::<f64>().sqrt();

    let build = |mu: f64, skip_top: bool| -> Vec<C64> {
        let mut y = vec![ZERO; d];
        for i in 0..d {
            if skip_top && in_top(i) {
                continue;
            }
            let coef = gamma[i] / (mu - lam[i]);
            for j in 0..d {
                y[j] += u[(j, i)] * coef;
            }
        }
        y
    };

    if top_mass <= 1e-10 * cn {
        let mut y = build(l1, true);
        let ny = norm(&y);
        if ny <= r {
            let alpha = (r * r - ny * ny).max(0.0).sqrt();
            for j in 0..d {
                y[j] += u[(j, top)] * alpha;
            }
            return (l1, y, true);
        }
    }

    let psi = |mu: f64| -> f64 { (0..d).map(|i| gamma[i].norm_sqr() / (mu - lam[i]).powi(2)).sum::<f64>() };
    let mut lo = l1;
    let mut hi = l1 + cn / r;
    if hi <= lo {
        hi = lo + f64::EPSILON * scale;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > r * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi, build(hi, false), false)
}

/// `‖(μ I - B)^{-1} b‖` by conjugate gradients; requires `μ > λ_max(B)`.
pub fn secular_norm<O: HermitianOperator + ?Sized>(op: &O, b: &[C64], mu: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let m = op.dim();
    let mut x = vec![ZERO; m];
    let mut res = b.to_vec();
    let mut dir = res.clone();
    let mut rr = linalg::norm_sqr(&res);
    let target = tol * tol * rr;
    let mut ad = vec![ZERO; m];
    for _ in 0..max_iter {
        if rr <= target || rr == 0.0 {
            return Ok(norm(&x));
        }
        op.apply(&dir, &mut ad);
        for (a, d) in ad.iter_mut().zip(&dir) {
            *a = d * mu - *a;
        }
        let curv = dot(&dir, &ad).re;
        if !(curv > 0.0) {
            return Err(Error::InvalidArgument(format!("mu = {mu} is not above the spectrum")));
        }
        let alpha = rr / curv;
        axpy(C64::new(alpha, 0.0), &dir, &mut x);
        axpy(C64::new(-alpha, 0.0), &ad, &mut res);
        let rr_new = linalg::norm_sqr(&res);
        let beta = rr_new / rr;
        rr = rr_new;
        for (d, r) in dir.iter_mut().zip(&res) {
            *d = r + *d * beta;
        }
    }
    Err(Error::TrsNotConverged {
        iterations: max_iter,
        residual: rr.sqrt(),
        best: Box::new(TrsSolution {
            z: x,
            multiplier: mu,
            objective: f64::NAN,
            status: TrsStatus::Boundary,
            residual: rr.sqrt(),
            iterations: max_iter,
            lambda_max: f64::NAN,
        }),
    })
}

#[cfg(test)]
mod tests;
