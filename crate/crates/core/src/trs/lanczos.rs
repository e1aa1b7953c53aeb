//! Hermitian Lanczos with full reorthogonalization.

use super::HermitianOperator;
use crate::linalg::{axpy, dot, norm};
use crate::C64;

pub(crate) struct Lanczos<'a, O: HermitianOperator + ?Sized> {
    op: &'a O,
    pub q: Vec<Vec<C64>>,
    pub alpha: Vec<f64>,
    /// `beta[j]` couples `q[j]` and `q[j + 1]`; the last entry is the
    /// norm of the residual after the most recent step.
    pub beta: Vec<f64>,
    next: Option<Vec<C64>>,
    pub breakdown: bool,
}

impl<'a, O: HermitianOperator + ?Sized> Lanczos<'a, O> {
    /// `start` must be nonzero.
    pub fn new(op: &'a O, start: &[C64]) -> Self {
        let nrm = norm(start);
        let q0: Vec<C64> = start.iter().map(|z| z / nrm).collect();
        Self { op, q: Vec::new(), alpha: Vec::new(), beta: Vec::new(), next: Some(q0), breakdown: false }
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn last_beta(&self) -> f64 {
        self.beta.last().copied().unwrap_or(0.0)
    }

    /// Normalized next Lanczos vector, when there was no breakdown.
    pub fn next_vector(&self) -> Option<&[C64]> {
        self.next.as_deref()
    }

    /// Performs one step; returns false after breakdown.
    pub fn step(&mut self, breakdown_tol: f64) -> bool {
        let Some(qj) = self.next.take() else {
            return false;
        };
        let m = qj.len();
        let mut w = vec![C64::new(0.0, 0.0); m];
        self.op.apply(&qj, &mut w);
        let a = dot(&qj, &w).re;
        axpy(C64::new(-a, 0.0), &qj, &mut w);
        if let (Some(prev), Some(&b)) = (self.q.last(), self.beta.last()) {
            axpy(C64::new(-b, 0.0), prev, &mut w);
        }
        self.q.push(qj);
        for _ in 0..2 {
            for qi in &self.q {
                let c = dot(qi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let b = norm(&w);
        self.alpha.push(a);
        self.beta.push(b);
        if b <= breakdown_tol || self.q.len() == m {
            self.breakdown = true;
        } else {
            let inv = 1.0 / b;
            w.iter_mut().for_each(|z| *z *= inv);
            self.next = Some(w);
        }
        !self.breakdown
    }

    pub fn tridiagonal(&self) -> (&[f64], &[f64]) {
        let k = self.alpha.len();
        (&self.alpha, &self.beta[..k.saturating_sub(1)])
    }

    /// `Q y` for real coefficients `y`.
    pub fn combine(&self, y: &[f64]) -> Vec<C64> {
        let m = self.q[0].len();
        let mut z = vec![C64::new(0.0, 0.0); m];
        for (qi, &c) in self.q.iter().zip(y) {
            axpy(C64::new(c, 0.0), qi, &mut z);
        }
        z
    }
}
