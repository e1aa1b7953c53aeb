//! Dense reference solver on the real embedding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{HermitianOperator, TrsProblem, TrsSolution, TrsStatus};
use crate::{Error, Result, C64};

pub const ORACLE_MAX_DIM: usize = 200;

/// `[[Re B, -Im B], [Im B, Re B]]`
pub fn real_embedding(b: &DMatrix<C64>) -> DMatrix<f64> {
    let m = b.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = b[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `(Re v, Im v)`
pub fn real_embedding_vector(v: &[C64]) -> DVector<f64> {
    let m = v.len();
    DVector::from_fn(2 * m, |i, _| if i < m { v[i].re } else { v[i - m].im })
}

fn from_real(x: &DVector<f64>) -> Vec<C64> {
    let m = x.len() / 2;
    (0..m).map(|i| C64::new(x[i], x[i + m])).collect()
}

/// Full eigendecomposition of the embedded `2m × 2m` problem, bisection on
/// the secular equation in the eigenbasis, explicit hard-case completion.
pub fn solve_trs_dense_oracle<O: HermitianOperator>(p: &TrsProblem<O>) -> Result<TrsSolution> {
    let m = p.dim();
    if m > ORACLE_MAX_DIM {
        return Err(Error::InvalidArgument(format!("oracle limited to dimension {ORACLE_MAX_DIM}, got {m}")));
    }
    let bc = p
        .op
        .dense()
        .ok_or_else(|| Error::InvalidArgument("oracle needs a dense quadratic term".into()))?;
    let br = real_embedding(&bc);
    let g = real_embedding_vector(&p.b);
    let r = p.radius;
    let eig = SymmetricEigen::new(br.clone());
    let lam = &eig.eigenvalues;
    let u = &eig.eigenvectors;
    let n2 = 2 * m;
    let coef = u.transpose() * &g;
    let l1 = lam.max();
    let scale = lam.amax().max(f64::MIN_POSITIVE);
    let top: Vec<usize> = (0..n2).filter(|&i| lam[i] >= l1 - 1e-9 * scale).collect();
    let rest: Vec<usize> = (0..n2).filter(|&i| lam[i] < l1 - 1e-9 * scale).collect();
    let gn = g.norm();
    let top_mass = top.iter().map(|&i| coef[i] * coef[i]).sum::<f64>().sqrt();

    let mut x = DVector::zeros(n2);
    let (mu, status) = 'solve: {
        if top_mass <= 1e-10 * gn {
            for &i in &rest {
                x += u.column(i) * (coef[i] / (l1 - lam[i]));
            }
            let nx = x.norm();
            if nx <= r {
                let alpha = (r * r - nx * nx).sqrt();
                x += u.column(top[0]) * alpha;
                let status = if gn == 0.0 && rest.is_empty() { TrsStatus::InteriorFree } else { TrsStatus::HardCase };
                break 'solve (l1, status);
            }
            x.fill(0.0);
        }
        // ψ(μ) = Σ c_i² / (μ - λ_i)² is decreasing on (λ_1, ∞) and ψ(λ_1 + ‖g‖/r) ≤ r²
        let psi = |mu: f64| (0..n2).map(|i| coef[i] * coef[i] / ((mu - lam[i]) * (mu - lam[i]))).sum::<f64>();
        let mut lo = l1;
        let mut hi = l1 + gn / r;
        loop {
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
        for i in 0..n2 {
            x += u.column(i) * (coef[i] / (hi - lam[i]));
        }
        (hi, TrsStatus::Boundary)
    };

    let nx = x.norm();
    if nx > 0.0 {
        x *= r / nx;
    }
    let bx = &br * &x;
    let objective = x.dot(&bx) + 2.0 * g.dot(&x);
    let residual = (bx + &g - &x * mu).norm();
    Ok(TrsSolution {
        z: from_real(&x),
        multiplier: mu,
        objective,
        status,
        residual,
        iterations: 0,
        lambda_max: l1,
    })
}
