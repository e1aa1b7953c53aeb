//! Anchored unit-modulus signals, measurement stacks and smoothness functionals.
//!
//! A time block `g(k) ∈ C^n` has unit-modulus entries; the anchored form fixes
//! `g_1(k) = 1` to remove the per-block global phase. Measurements are stored
//! block-wise (one `n × n` Hermitian matrix per time point) so per-block and
//! stacked views are both cheap.

mod format;

pub use format::{read_measurements, read_signal, write_measurements, write_signal};

use nalgebra::DMatrix;

use crate::linalg::hermitian_deviation;
use crate::{Error, Result, C64};

/// Tolerance on `| |z| - 1 |` accepted by [`UnitSignal::new`].
pub const UNIT_TOL: f64 = 1e-12;

/// Tolerance on `|M_ij - conj(M_ji)|` accepted by [`MeasurementStack::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Entrywise projection onto the unit torus: `z_i / |z_i|`, or `1` when `z_i = 0`.
pub fn project_to_circle(z: &[C64]) -> Vec<C64> {
    z.iter().map(|&zi| project_entry(zi)).collect()
}

fn project_entry(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        ONE
    } else if (r - 1.0).abs() <= 4.0 * f64::EPSILON {
        // already on the circle; keeps the projection idempotent bit-for-bit
        z
    } else {
        z / r
    }
}

/// Rotates a unit-modulus block so its first entry is exactly `1`.
///
/// `arg(0)` is taken as 0, so a zero first entry leaves the block unrotated.
pub fn anchor_block(w: &[C64]) -> UnitSignal {
    let mut values = w.to_vec();
    if let Some(&first) = w.first() {
        let r = first.norm();
        if r > 0.0 {
            let rot = first.conj() / r;
            for v in values.iter_mut().skip(1) {
                *v *= rot;
            }
        }
        values[0] = ONE;
    }
    UnitSignal { values }
}

/// One time block of `n` unit-modulus phases.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSignal {
    values: Vec<C64>,
}

impl UnitSignal {
    /// Wraps `values`, requiring `|values[i]| = 1` within [`UNIT_TOL`].
    pub fn new(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("signal block must be non-empty".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() || (v.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "entry {i} has modulus {} (expected 1)",
                    v.norm()
                )));
            }
        }
        Ok(Self { values })
    }

    /// Re-normalizes every entry onto the circle; rejects zero or non-finite entries.
    pub fn normalized(values: Vec<C64>) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            let r = v.norm();
            if !r.is_finite() || r == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "entry {i} cannot be normalized (modulus {r})"
                )));
            }
            out.push(project_entry(v));
        }
        Self::new(out)
    }

    /// `concat(1, tail)`; `tail` entries must be unit modulus.
    pub fn anchored(tail: &[C64]) -> Result<Self> {
        let mut values = Vec::with_capacity(tail.len() + 1);
        values.push(ONE);
        values.extend_from_slice(tail);
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Entries after the anchor, `g̃(k)`.
    pub fn tail(&self) -> &[C64] {
        &self.values[1..]
    }

    pub fn is_anchored(&self) -> bool {
        self.values[0] == ONE
    }

    /// `g g^H`
    pub fn outer(&self) -> DMatrix<C64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.values[i] * self.values[j].conj())
    }
}

/// `T` time blocks of equal length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSignal {
    n: usize,
    blocks: Vec<UnitSignal>,
}

impl StackedSignal {
    pub fn new(blocks: Vec<UnitSignal>) -> Result<Self> {
        let n = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack needs at least one block".into()))?
            .n();
        if let Some(k) = blocks.iter().position(|b| b.n() != n) {
            return Err(Error::Shape(format!("block {k} has length {} (expected {n})", blocks[k].n())));
        }
        Ok(Self { n, blocks })
    }

    /// Builds a stack from a flat `nT` vector of unit-modulus entries.
    pub fn from_flat(n: usize, values: &[C64]) -> Result<Self> {
        if n == 0 || values.is_empty() || values.len() % n != 0 {
            return Err(Error::Shape(format!("length {} is not a multiple of n = {n}", values.len())));
        }
        let blocks = values
            .chunks(n)
            .map(|c| UnitSignal::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    /// Anchored stack from the flat `(n-1)T` tail vector.
    pub fn from_tails(n: usize, tails: &[C64]) -> Result<Self> {
        if n < 1 || (n > 1 && tails.len() % (n - 1) != 0) {
            return Err(Error::Shape(format!("tail length {} incompatible with n = {n}", tails.len())));
        }
        let blocks = tails
            .chunks(n - 1)
            .map(UnitSignal::anchored)
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[UnitSignal] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &UnitSignal {
        &self.blocks[k]
    }

    pub fn flatten(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.values().iter().copied()).collect()
    }

    /// Stacked `g̃ = concat(g̃(1), …, g̃(T))`.
    pub fn tails_flat(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.tail().iter().copied()).collect()
    }

    pub fn is_anchored(&self) -> bool {
        self.blocks.iter().all(UnitSignal::is_anchored)
    }

    /// Rank-one blocks `G(k) = g(k) g(k)^H`.
    pub fn rank_one_blocks(&self) -> Vec<DMatrix<C64>> {
        self.blocks.iter().map(UnitSignal::outer).collect()
    }

    /// Shifted blocks `G(k) - I_n`.
    pub fn shifted_rank_one_blocks(&self) -> Vec<DMatrix<C64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut g = b.outer();
                for i in 0..self.n {
                    g[(i, i)] -= ONE;
                }
                g
            })
            .collect()
    }
}

/// `Σ_{k<T} ‖g(k) - g(k+1)‖²`, the quadratic variation along the time path.
pub fn smoothness_of(g: &StackedSignal) -> f64 {
    g.blocks
        .windows(2)
        .map(|w| {
            w[0].values
                .iter()
                .zip(&w[1].values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

/// `Σ_{k<T} ‖G(k) - G(k+1)‖²_F`.
pub fn matrix_smoothness_of(blocks: &[DMatrix<C64>]) -> Result<f64> {
    if let Some(first) = blocks.first() {
        if blocks.iter().any(|b| b.shape() != first.shape()) {
            return Err(Error::Shape("blocks differ in shape".into()));
        }
    }
    Ok(blocks.windows(2).map(|w| (&w[0] - &w[1]).norm_squared()).sum())
}

/// `T` Hermitian `n × n` measurement blocks with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStack {
    n: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl MeasurementStack {
    /// Validates shape, Hermitian symmetry (within [`HERMITIAN_TOL`]) and an
    /// exactly zero diagonal.
    pub fn new(blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        let n = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack needs at least one block".into()))?
            .nrows();
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::Shape(format!(
                    "block {k} is {}x{} (expected {n}x{n})",
                    b.nrows(),
                    b.ncols()
                )));
            }
            let deviation = hermitian_deviation(b);
            if !(deviation <= HERMITIAN_TOL) {
                return Err(Error::NotHermitian { block: k, deviation });
            }
            if let Some(index) = (0..n).find(|&i| b[(i, i)] != ZERO) {
                return Err(Error::NonzeroDiagonal { block: k, index });
            }
        }
        Ok(Self { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<C64> {
        &self.blocks[k]
    }

    /// Anchored split of block `k`: `(Ã(k), b(k))` where `b(k)` is the first
    /// column below the diagonal.
    pub fn split(&self, k: usize) -> (DMatrix<C64>, Vec<C64>) {
        anchored_split(&self.blocks[k])
    }

    pub fn into_blocks(self) -> Vec<DMatrix<C64>> {
        self.blocks
    }
}

/// `A = [[A₁₁, b^H], [b, Ã]]` → `(Ã, b)`.
pub fn anchored_split(a: &DMatrix<C64>) -> (DMatrix<C64>, Vec<C64>) {
    let n = a.nrows();
    let tilde = a.view((1, 1), (n - 1, n - 1)).into_owned();
    let b = (1..n).map(|i| a[(i, 0)]).collect();
    (tilde, b)
}

/// Denoised blocks `Ĝ(k)`; Hermitian only after [`DenoisedStack::hermitianize`].
#[derive(Debug, Clone)]
pub struct DenoisedStack {
    blocks: Vec<DMatrix<C64>>,
    hermitianized: bool,
}

impl DenoisedStack {
    pub fn new(blocks: Vec<DMatrix<C64>>) -> Self {
        Self {
            blocks,
            hermitianized: false,
        }
    }

    pub fn hermitianize(self) -> Self {
        let blocks = self.blocks.iter().map(crate::linalg::hermitianize).collect();
        Self {
            blocks,
            hermitianized: true,
        }
    }

    pub fn is_hermitianized(&self) -> bool {
        self.hermitianized
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn t(&self) -> usize {
        self.blocks.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn circle_projection_examples() {
        let out = project_to_circle(&[c(2.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        assert_eq!(out, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)]);
        let out = project_to_circle(&[c(3.0, 4.0)]);
        assert!((out[0] - c(0.6, 0.8)).norm() < 1e-15);
        let w = [c(0.6, 0.8), c(-1.0, 0.0)];
        assert_eq!(project_to_circle(&w), w.to_vec());
    }

    #[test]
    fn anchoring_examples() {
        let a = anchor_block(&[c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let want = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        for (x, y) in a.values().iter().zip(&want) {
            assert!((x - y).norm() < 1e-15);
        }
        let a = anchor_block(&[c(-1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(a.values(), &[c(1.0, 0.0), c(1.0, 0.0)]);
        let w = [c(1.0, 0.0), c(0.6, -0.8)];
        assert_eq!(anchor_block(&w).values(), &w);
    }

    #[test]
    fn smoothness_examples() {
        let g = StackedSignal::new(vec![
            UnitSignal::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap(),
            UnitSignal::new(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(smoothness_of(&g), 4.0);
        let single = StackedSignal::new(vec![UnitSignal::anchored(&[c(0.0, 1.0)]).unwrap()]).unwrap();
        assert_eq!(smoothness_of(&single), 0.0);
        let constant = StackedSignal::new(vec![g.block(1).clone(); 5]).unwrap();
        assert_eq!(smoothness_of(&constant), 0.0);
    }

    #[test]
    fn matrix_smoothness_single_offdiagonal_perturbation() {
        let eps = 0.3;
        let a = DMatrix::from_element(3, 3, c(0.0, 0.0));
        let mut b = a.clone();
        b[(0, 2)] = c(0.0, eps);
        b[(2, 0)] = c(0.0, -eps);
        let s = matrix_smoothness_of(&[a.clone(), b]).unwrap();
        assert!((s - 2.0 * eps * eps).abs() < 1e-15);
        assert_eq!(matrix_smoothness_of(&[a.clone(), a.clone(), a]).unwrap(), 0.0);
    }

    #[test]
    fn measurement_stack_validation() {
        let mut m = DMatrix::from_element(2, 2, c(0.0, 0.0));
        m[(0, 1)] = c(0.0, 1.0);
        m[(1, 0)] = c(0.0, 1.0);
        assert!(matches!(
            MeasurementStack::new(vec![m.clone()]),
            Err(Error::NotHermitian { .. })
        ));
        m[(1, 0)] = c(0.0, -1.0);
        assert!(MeasurementStack::new(vec![m.clone()]).is_ok());
        m[(1, 1)] = c(1e-300, 0.0);
        assert!(matches!(
            MeasurementStack::new(vec![m]),
            Err(Error::NonzeroDiagonal { block: 0, index: 1 })
        ));
    }

    #[test]
    fn unit_signal_rejects_off_circle_and_normalizes_on_request() {
        assert!(UnitSignal::new(vec![c(1.0, 1e-5)]).is_err());
        let s = UnitSignal::normalized(vec![c(2.0, 0.0), c(0.0, -3.0)]).unwrap();
        assert_eq!(s.values(), &[c(1.0, 0.0), c(0.0, -1.0)]);
        assert!(UnitSignal::normalized(vec![c(0.0, 0.0)]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(parts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)) {
            let z: Vec<C64> = parts.into_iter().map(|(a, b)| c(a, b)).collect();
            let p = project_to_circle(&z);
            prop_assert_eq!(project_to_circle(&p), p.clone());
            for v in &p {
                prop_assert!((v.norm() - 1.0).abs() <= 4.0 * f64::EPSILON);
            }
        }

        #[test]
        fn anchor_gives_exact_one(angles in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 1..20)) {
            let w: Vec<C64> = angles.iter().map(|&a| C64::from_polar(1.0, a)).collect();
            let a = anchor_block(&w);
            prop_assert_eq!(a.values()[0], c(1.0, 0.0));
        }
    }
}
