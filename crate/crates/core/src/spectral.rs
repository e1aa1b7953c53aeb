//! Path-graph Laplacian basis and the low-frequency projector `P_{τ,n}`.
//!
//! The Laplacian `MM^T` of the path on `T` vertices has eigenpairs
//! `4 sin²(jπ/(2T))`, `v(j)_k ∝ cos(jπ(k + 1/2)/T)` for `j = 0..T-1`.
//! `P_{τ,n} = (Σ_{j<τ} v(j) v(j)^T) ⊗ I_n` keeps the `τ` lowest frequencies
//! of every entry's time series. It is applied block-wise and never formed.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Closed-form eigendecomposition of the path Laplacian on `T` vertices.
///
/// Internally stored in frequency order (`j = 0` is the constant vector); the
/// accessors [`eigenvalues`](Self::eigenvalues) and
/// [`eigenvectors`](Self::eigenvectors) use the nonincreasing order
/// `λ₁ ≥ … ≥ λ_T = 0`.
#[derive(Debug, Clone)]
pub struct PathSpectralBasis {
    t: usize,
    /// `freq_values[j] = 4 sin²(jπ/(2T))`
    freq_values: Vec<f64>,
    /// `freq_vectors[j]`, orthonormal, length `T`
    freq_vectors: Vec<Vec<f64>>,
}

impl PathSpectralBasis {
    pub fn new(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument("T must be positive".into()));
        }
        let tf = t as f64;
        let freq_values = (0..t)
            .map(|j| {
                let s = (j as f64 * PI / (2.0 * tf)).sin();
                4.0 * s * s
            })
            .collect();
        let mut freq_vectors: Vec<Vec<f64>> = (0..t)
            .map(|j| {
                (0..t)
                    .map(|k| (j as f64 * PI * (k as f64 + 0.5) / tf).cos())
                    .collect()
            })
            .collect();
        // one modified Gram-Schmidt pass
        for j in 0..t {
            for i in 0..j {
                let (head, tail) = freq_vectors.split_at_mut(j);
                let c: f64 = head[i].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= c * y;
                }
            }
            let nrm = freq_vectors[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            freq_vectors[j].iter_mut().for_each(|x| *x /= nrm);
        }
        Ok(Self {
            t,
            freq_values,
            freq_vectors,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `λ₁ ≥ … ≥ λ_T = 0`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.freq_values.iter().rev().copied().collect()
    }

    /// `v₁, …, v_T`, paired with [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> Vec<Vec<f64>> {
        self.freq_vectors.iter().rev().cloned().collect()
    }

    /// Eigenvalue of frequency `j` (`j = 0` is the kernel).
    pub fn frequency_value(&self, j: usize) -> f64 {
        self.freq_values[j]
    }

    pub fn frequency_vector(&self, j: usize) -> &[f64] {
        &self.freq_vectors[j]
    }

    /// Applies `(Σ_{j<τ} v(j) v(j)^T) ⊗ I` to `T` consecutive blocks of
    /// `block_len` entries each.
    fn project_flat(&self, tau: usize, block_len: usize, x: &[C64]) -> Vec<C64> {
        let t = self.t;
        debug_assert_eq!(x.len(), t * block_len);
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        let mut coeff = vec![C64::new(0.0, 0.0); block_len];
        for v in &self.freq_vectors[..tau] {
            coeff.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            for (k, vk) in v.iter().enumerate() {
                let block = &x[k * block_len..(k + 1) * block_len];
                for (c, xv) in coeff.iter_mut().zip(block) {
                    *c += xv * *vk;
                }
            }
            for (k, vk) in v.iter().enumerate() {
                let block = &mut out[k * block_len..(k + 1) * block_len];
                for (o, c) in block.iter_mut().zip(&coeff) {
                    *o += c * *vk;
                }
            }
        }
        out
    }
}

/// `P_{τ,n}` on top of a shared path basis.
#[derive(Debug, Clone)]
pub struct SmoothProjector {
    basis: Arc<PathSpectralBasis>,
    tau: usize,
    n: usize,
}

impl SmoothProjector {
    pub fn new(basis: Arc<PathSpectralBasis>, tau: usize, n: usize) -> Result<Self> {
        if tau == 0 || tau > basis.t() {
            return Err(Error::InvalidArgument(format!(
                "tau = {tau} outside [1, {}]",
                basis.t()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        Ok(Self { basis, tau, n })
    }

    /// Convenience constructor building a fresh basis.
    pub fn for_shape(t: usize, tau: usize, n: usize) -> Result<Self> {
        Self::new(Arc::new(PathSpectralBasis::new(t)?), tau, n)
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.basis.t()
    }

    pub fn basis(&self) -> &PathSpectralBasis {
        &self.basis
    }

    /// Rank of the implied `nT × nT` projector.
    pub fn rank(&self) -> usize {
        self.n * self.tau
    }

    /// `P_{τ,n} X` for `X` given as `T` blocks of shape `n × m`.
    pub fn apply(&self, x: &[DMatrix<C64>]) -> Result<Vec<DMatrix<C64>>> {
        let (m, flat) = self.flatten_blocks(x)?;
        let out = self.basis.project_flat(self.tau, self.n * m, &flat);
        Ok(out
            .chunks(self.n * m)
            .map(|c| DMatrix::from_column_slice(self.n, m, c))
            .collect())
    }

    /// `P⊥_{τ,n} X = X - P_{τ,n} X`.
    pub fn apply_complement(&self, x: &[DMatrix<C64>]) -> Result<Vec<DMatrix<C64>>> {
        let p = self.apply(x)?;
        Ok(x.iter().zip(p).map(|(a, b)| a - b).collect())
    }

    /// `P_{τ,n} x` for a stacked vector of length `nT` (time-major blocks).
    pub fn apply_vector(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n * self.t() {
            return Err(Error::Shape(format!(
                "vector length {} != n·T = {}",
                x.len(),
                self.n * self.t()
            )));
        }
        Ok(self.basis.project_flat(self.tau, self.n, x))
    }

    pub fn apply_complement_vector(&self, x: &[C64]) -> Result<Vec<C64>> {
        let p = self.apply_vector(x)?;
        Ok(x.iter().zip(p).map(|(a, b)| a - b).collect())
    }

    fn flatten_blocks(&self, x: &[DMatrix<C64>]) -> Result<(usize, Vec<C64>)> {
        if x.len() != self.t() {
            return Err(Error::Shape(format!("{} blocks != T = {}", x.len(), self.t())));
        }
        let m = x[0].ncols();
        let mut flat = Vec::with_capacity(self.n * m * x.len());
        for (k, b) in x.iter().enumerate() {
            if b.nrows() != self.n || b.ncols() != m {
                return Err(Error::Shape(format!(
                    "block {k} is {}x{} (expected {}x{m})",
                    b.nrows(),
                    b.ncols(),
                    self.n
                )));
            }
            flat.extend_from_slice(b.as_slice());
        }
        Ok((m, flat))
    }
}

/// Dense path Laplacian, for tests and diagnostics.
pub fn path_laplacian(t: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(t, t);
    for k in 0..t.saturating_sub(1) {
        l[(k, k)] += 1.0;
        l[(k + 1, k + 1)] += 1.0;
        l[(k, k + 1)] -= 1.0;
        l[(k + 1, k)] -= 1.0;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn random_blocks(seed: u64, t: usize, n: usize, m: usize) -> Vec<DMatrix<C64>> {
        // xorshift keeps the test independent of the crate's RNG plumbing
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..t)
            .map(|_| DMatrix::from_fn(n, m, |_, _| C64::new(next(), next())))
            .collect()
    }

    fn frob2(x: &[DMatrix<C64>]) -> f64 {
        x.iter().map(|b| b.norm_squared()).sum()
    }

    #[test]
    fn t2_eigenvalues() {
        let b = PathSpectralBasis::new(2).unwrap();
        let ev = b.eigenvalues();
        assert!((ev[0] - 2.0).abs() < 1e-15 && ev[1] == 0.0);
    }

    #[test]
    fn rejects_zero_length() {
        assert!(PathSpectralBasis::new(0).is_err());
    }

    #[test]
    fn matches_brute_force_eigendecomposition() {
        for t in [1usize, 2, 3, 4, 7, 16, 33] {
            let basis = PathSpectralBasis::new(t).unwrap();
            let eig = SymmetricEigen::new(path_laplacian(t));
            let mut brute: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            brute.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in basis.eigenvalues().iter().zip(&brute) {
                assert!((a - b).abs() < 1e-10, "T={t}: {a} vs {b}");
            }
            // distinct eigenvalues: no tie convention needed
            let ev = basis.eigenvalues();
            for w in ev.windows(2) {
                assert!(w[0] > w[1]);
            }
            // reconstruction and orthonormality
            let vs = basis.eigenvectors();
            let mut recon = DMatrix::<f64>::zeros(t, t);
            for (lam, v) in ev.iter().zip(&vs) {
                for i in 0..t {
                    for j in 0..t {
                        recon[(i, j)] += lam * v[i] * v[j];
                    }
                }
            }
            assert!((recon - path_laplacian(t)).abs().max() < 1e-10);
            for (a, va) in vs.iter().enumerate() {
                for (b, vb) in vs.iter().enumerate() {
                    let g: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-10);
                }
            }
            let last = &vs[t - 1];
            assert!(last.iter().all(|x| (x - 1.0 / (t as f64).sqrt()).abs() < 1e-12));
        }
    }

    #[test]
    fn t4_tau2_eigenvalue() {
        // λ_{T-τ} for T = 4, τ = 2 is 4 sin²(π/4) = 2
        let ev = PathSpectralBasis::new(4).unwrap().eigenvalues();
        assert!((ev[4 - 2 - 1] - 2.0).abs() < 1e-12);
        let brute = SymmetricEigen::new(path_laplacian(4)).eigenvalues;
        assert!(brute.iter().any(|x| (x - 2.0).abs() < 1e-10));
    }

    #[test]
    fn full_rank_is_identity_and_tau_one_is_time_average() {
        let x = random_blocks(3, 6, 3, 2);
        let p = SmoothProjector::for_shape(6, 6, 3).unwrap();
        let y = p.apply(&x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(frob2(&p.apply_complement(&x).unwrap()) < 1e-24);

        let p1 = SmoothProjector::for_shape(6, 1, 3).unwrap();
        let y = p1.apply(&x).unwrap();
        let mean = x.iter().fold(DMatrix::from_element(3, 2, C64::new(0.0, 0.0)), |acc, b| acc + b) / C64::new(6.0, 0.0);
        for b in &y {
            assert!((b - &mean).norm() < 1e-12);
        }
        // constants are killed by the complement
        let c = vec![mean.clone(); 6];
        assert!(frob2(&p1.apply_complement(&c).unwrap()) < 1e-24);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = SmoothProjector::for_shape(4, 2, 3).unwrap();
        assert!(p.apply(&random_blocks(1, 3, 3, 1)).is_err());
        assert!(p.apply(&random_blocks(1, 4, 2, 1)).is_err());
        assert!(p.apply_vector(&[C64::new(0.0, 0.0); 5]).is_err());
        assert!(SmoothProjector::for_shape(4, 0, 3).is_err());
        assert!(SmoothProjector::for_shape(4, 5, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projector_algebra(seed in any::<u64>(), t in 1usize..25, n in 1usize..5, m in 1usize..4, tau_frac in 0.0f64..1.0) {
            let tau = 1 + ((t - 1) as f64 * tau_frac) as usize;
            let x = random_blocks(seed, t, n, m);
            let p = SmoothProjector::for_shape(t, tau, n).unwrap();
            let px = p.apply(&x).unwrap();
            let ppx = p.apply(&px).unwrap();
            let xx = frob2(&x);
            let idem: f64 = px.iter().zip(&ppx).map(|(a, b)| (a - b).norm_squared()).sum();
            prop_assert!(idem.sqrt() <= 1e-9 * xx.sqrt());
            let comp = p.apply_complement(&x).unwrap();
            let inner: C64 = px.iter().zip(&comp).map(|(a, b)| a.dotc(b)).sum();
            prop_assert!(inner.norm() <= 1e-9 * xx);
            prop_assert!((frob2(&px) + frob2(&comp) - xx).abs() <= 1e-9 * xx);
            // monotone in τ
            let mut prev = f64::INFINITY;
            for tau2 in 1..=t {
                let c = frob2(&SmoothProjector::for_shape(t, tau2, n).unwrap().apply_complement(&x).unwrap());
                prop_assert!(c <= prev + 1e-12 * xx);
                prev = c;
            }
        }
    }
}
