use super::*;
use crate::rng;

fn random_hermitian(m: usize, seed: u64) -> DMatrix<C64> {
    let mut r = rng::stream(seed, 99, 0);
    let a = DMatrix::from_fn(m, m, |_, _| rng::complex_normal(&mut r));
    linalg::hermitianize(&(&a + a.adjoint()))
}

fn random_vec(m: usize, seed: u64) -> Vec<C64> {
    let mut r = rng::stream(seed, 99, 1);
    (0..m).map(|_| rng::complex_normal(&mut r)).collect()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn zero_quadratic_gives_aligned_solution() {
    let b = vec![c(3.0), C64::new(0.0, 4.0)];
    let p = TrsProblem::dense(DMatrix::from_element(2, 2, ZERO), b.clone(), 2.0).unwrap();
    let s = solve_trs(&p, 1e-10).unwrap();
    assert!((s.objective - 2.0 * 2.0 * 5.0).abs() < 1e-12);
    for (z, bi) in s.z.iter().zip(&b) {
        assert!((z - bi * (2.0 / 5.0)).norm() < 1e-12);
    }
    assert_eq!(s.status, TrsStatus::Boundary);
}

#[test]
fn diagonal_without_linear_term_is_hard_case() {
    let b_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(1.0)]));
    let p = TrsProblem::dense(b_mat, vec![ZERO; 2], 1.0).unwrap();
    let s = solve_trs(&p, 1e-10).unwrap();
    assert_eq!(s.status, TrsStatus::HardCase);
    assert!((s.objective - 2.0).abs() < 1e-10);
    assert!((s.z[0].norm() - 1.0).abs() < 1e-8 && s.z[1].norm() < 1e-6);
    let o = solve_trs_dense_oracle(&p).unwrap();
    assert_eq!(o.status, TrsStatus::HardCase);
    assert!((o.objective - 2.0).abs() < 1e-12);
}

#[test]
fn negative_identity_is_interior_free() {
    let p = TrsProblem::dense(-DMatrix::<C64>::identity(4, 4), vec![ZERO; 4], 1.5).unwrap();
    let s = solve_trs(&p, 1e-10).unwrap();
    assert_eq!(s.status, TrsStatus::InteriorFree);
    assert!((s.objective + 2.25).abs() < 1e-12);
    let o = solve_trs_dense_oracle(&p).unwrap();
    assert_eq!(o.status, TrsStatus::InteriorFree);
    assert!((o.objective + 2.25).abs() < 1e-12);
}

#[test]
fn linear_term_along_top_eigenvector() {
    let b_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(1.0), c(-2.0)]));
    let p = TrsProblem::dense(b_mat, vec![C64::new(0.0, 0.5), ZERO, ZERO], 2.0).unwrap();
    for s in [solve_trs(&p, 1e-10).unwrap(), solve_trs_dense_oracle(&p).unwrap()] {
        assert_eq!(s.status, TrsStatus::Boundary);
        // μ = 3 + 0.5/2, z = 2i e₁
        assert!((s.multiplier - 3.25).abs() < 1e-10);
        assert!((s.z[0] - C64::new(0.0, 2.0)).norm() < 1e-10);
    }
}

#[test]
fn rejects_bad_problems() {
    let mut m = random_hermitian(3, 1);
    m[(0, 1)] += c(1.0);
    assert!(matches!(TrsProblem::dense(m, vec![ZERO; 3], 1.0), Err(Error::NotHermitian { .. })));
    assert!(TrsProblem::dense(random_hermitian(3, 1), vec![ZERO; 2], 1.0).is_err());
    assert!(TrsProblem::dense(random_hermitian(3, 1), vec![ZERO; 3], 0.0).is_err());
    let p = TrsProblem::dense(random_hermitian(3, 1), vec![ZERO; 3], 1.0).unwrap();
    assert!(solve_trs(&p, 0.5).is_err());
    let big = TrsProblem::dense(DMatrix::identity(201, 201), vec![ZERO; 201], 1.0).unwrap();
    assert!(solve_trs_dense_oracle(&big).is_err());
}

#[test]
fn matches_oracle_on_random_instances() {
    for seed in 0..30 {
        let m = 2 + (seed as usize % 11);
        let p = TrsProblem::dense(random_hermitian(m, seed), random_vec(m, seed), 1.0 + seed as f64 * 0.1).unwrap();
        let s = solve_trs(&p, 1e-10).unwrap();
        let o = solve_trs_dense_oracle(&p).unwrap();
        assert!((s.objective - o.objective).abs() <= 1e-9 * (1.0 + o.objective.abs()), "seed {seed}");
        assert!(s.multiplier >= o.lambda_max - 1e-8);
        assert!((norm(&s.z) - p.radius).abs() <= 1e-10 * p.radius);
    }
}

#[test]
fn constructed_hard_case() {
    // b orthogonal to the top eigenvector and small enough that the limit
    // point lies strictly inside the sphere
    let m = 6;
    let mut r = rng::stream(5, 99, 2);
    let q = random_hermitian(m, 7).symmetric_eigen().eigenvectors;
    let lam = [5.0, 1.0, 0.5, -1.0, -2.0, -3.0];
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(m, lam.iter().map(|&x| c(x))));
    let b_mat = linalg::hermitianize(&(&q * d * q.adjoint()));
    let mut coef = vec![ZERO; m];
    for ci in coef.iter_mut().skip(1) {
        *ci = rng::complex_normal(&mut r) * 0.1;
    }
    let b: Vec<C64> = (0..m).map(|i| (0..m).map(|j| q[(i, j)] * coef[j]).sum()).collect();
    let p = TrsProblem::dense(b_mat, b, 2.0).unwrap();
    let s = solve_trs(&p, 1e-10).unwrap();
    let o = solve_trs_dense_oracle(&p).unwrap();
    assert_eq!(o.status, TrsStatus::HardCase);
    assert_eq!(s.status, TrsStatus::HardCase);
    assert!((s.objective - o.objective).abs() < 1e-9 * o.objective.abs());
    assert!((s.multiplier - 5.0).abs() < 1e-8);
}

#[test]
fn phase_covariance() {
    let m = 7;
    let p = TrsProblem::dense(random_hermitian(m, 3), random_vec(m, 3), 1.3).unwrap();
    let rot = C64::from_polar(1.0, 0.83);
    let pr = TrsProblem::dense(p.op.0.clone(), p.b.iter().map(|z| z * rot).collect(), 1.3).unwrap();
    let a = solve_trs(&p, 1e-12).unwrap();
    let b = solve_trs(&pr, 1e-12).unwrap();
    for (x, y) in a.z.iter().zip(&b.z) {
        assert!((x * rot - y).norm() < 1e-8);
    }
}

#[test]
fn secular_norm_is_decreasing_above_spectrum() {
    let m = 8;
    let b_mat = random_hermitian(m, 4);
    let lmax = SymmetricEigen::new(b_mat.clone()).eigenvalues.max();
    let op = DenseHermitian(b_mat);
    let b = random_vec(m, 4);
    let mut prev = f64::INFINITY;
    for i in 1..40 {
        let mu = lmax + 0.05 * i as f64;
        let v = secular_norm(&op, &b, mu, 1e-13, 200).unwrap();
        assert!(v < prev);
        prev = v;
    }
    assert!(secular_norm(&op, &b, lmax - 1.0, 1e-13, 200).is_err());
}

#[test]
fn embedding_preserves_objective() {
    let m = 5;
    let p = TrsProblem::dense(random_hermitian(m, 6), random_vec(m, 6), 1.0).unwrap();
    let z = random_vec(m, 8);
    let br = real_embedding(&p.op.0);
    let zr = real_embedding_vector(&z);
    let g = real_embedding_vector(&p.b);
    let real = zr.dot(&(&br * &zr)) + 2.0 * g.dot(&zr);
    let cplx = p.objective(&z);
    assert!((real - cplx).abs() <= 1e-10 * cplx.abs().max(1.0));
}

#[test]
fn oracle_beats_random_sphere_points() {
    let m = 4;
    let p = TrsProblem::dense(random_hermitian(m, 9), random_vec(m, 9), 1.7).unwrap();
    let o = solve_trs_dense_oracle(&p).unwrap();
    let mut r = rng::stream(1, 99, 3);
    for _ in 0..2000 {
        let mut z: Vec<C64> = (0..m).map(|_| rng::complex_normal(&mut r)).collect();
        let s = 1.7 / norm(&z);
        z.iter_mut().for_each(|v| *v *= s);
        assert!(p.objective(&z) <= o.objective + 1e-10);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solver_matches_oracle(m in 1usize..10, seed in any::<u64>(), radius in 0.1f64..5.0) {
            let p = TrsProblem::dense(random_hermitian(m, seed), random_vec(m, seed), radius).unwrap();
            let s = solve_trs(&p, 1e-10).unwrap();
            let o = solve_trs_dense_oracle(&p).unwrap();
            prop_assert!((s.objective - o.objective).abs() <= 1e-8 * o.objective.abs().max(1.0));
            prop_assert!((linalg::norm(&s.z) - radius).abs() <= 1e-8 * radius);
        }

        #[test]
        fn solution_beats_aligned_point(m in 1usize..10, seed in any::<u64>(), radius in 0.1f64..5.0) {
            let b = random_vec(m, seed);
            let nb = linalg::norm(&b);
            let p = TrsProblem::dense(random_hermitian(m, seed), b.clone(), radius).unwrap();
            let z0: Vec<C64> = b.iter().map(|z| z * (radius / nb)).collect();
            let f0 = p.objective(&z0);
            prop_assert!(solve_trs(&p, 1e-10).unwrap().objective >= f0 - 1e-10 * f0.abs().max(1.0));
        }
    }
}
