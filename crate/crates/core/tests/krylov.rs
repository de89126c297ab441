mod common;

use common::{dense_matvec, dense_solve, rel_err, seeded_matrix, seeded_vector, Dense};
use helmhss::assembly::{assemble_mesh, primal_coefficients};
use helmhss::krylov::{
    fgmres, gmres_fixed, gmres_right, IdentityPreconditioner, KrylovConfig, KrylovMode, LinearOperator,
};
use helmhss::linalgc::{BandedLU, ComplexSparseMatrix, CsrMatrix, Jacobi};
use helmhss::mesh::build_mesh;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

struct DenseOp(Dense);

impl LinearOperator for DenseOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&dense_matvec(&self.0, x));
    }
}

fn helmholtz(k: f64, n: usize) -> ComplexSparseMatrix {
    primal_coefficients(k, 0.0).assemble(&assemble_mesh(&build_mesh(n).unwrap()))
}

#[test]
fn fgmres_matches_dense_oracle() {
    let a = seeded_matrix(30, 4, 8.0);
    let b = seeded_vector(30, 5);
    let x0 = seeded_vector(30, 6);
    let cfg = KrylovConfig {
        rtol: 1e-12,
        ..KrylovConfig::default()
    };
    let (x, trace) = fgmres(&DenseOp(a.clone()), &b, &x0, &cfg, &mut IdentityPreconditioner).unwrap();
    assert!(trace.converged);
    assert!(rel_err(&x, &dense_solve(&a, &b)) < 1e-10);
    assert!(*trace.residuals.last().unwrap() <= 1e-12 * trace.residuals[0]);
}

#[test]
fn exact_preconditioner_converges_in_one_iteration() {
    let a = helmholtz(6.0, 10);
    let lu = BandedLU::factor(&a).unwrap();
    let b = seeded_vector(a.rows(), 1);
    let x0 = seeded_vector(a.rows(), 2);
    let mut pc = |r: &[C64], z: &mut [C64]| {
        z.copy_from_slice(&lu.solve(r));
        Ok(())
    };
    let cfg = KrylovConfig {
        rtol: 1e-12,
        ..KrylovConfig::default()
    };
    let (_, trace) = fgmres(&a, &b, &x0, &cfg, &mut pc).unwrap();
    assert_eq!(trace.iterations, 1);
    assert!(trace.converged);
}

#[test]
fn flexible_and_plain_right_gmres_agree_for_fixed_preconditioner() {
    let a = helmholtz(5.0, 8);
    let jac = Jacobi::new(&a).unwrap();
    let b = seeded_vector(a.rows(), 3);
    let x0 = seeded_vector(a.rows(), 4);
    for iters in [1usize, 5, 12] {
        let cfg = KrylovConfig {
            maxiter: iters,
            mode: KrylovMode::FixedIterations,
            ..KrylovConfig::default()
        };
        let mut p1 = |r: &[C64], z: &mut [C64]| {
            jac.apply_into(r, z);
            Ok(())
        };
        let mut p2 = |r: &[C64], z: &mut [C64]| {
            jac.apply_into(r, z);
            Ok(())
        };
        let (xf, _) = fgmres(&a, &b, &x0, &cfg, &mut p1).unwrap();
        let (xr, _) = gmres_right(&a, &b, &x0, &cfg, &mut p2).unwrap();
        assert!(rel_err(&xf, &xr) < 1e-12, "iters {iters}");
    }
}

#[test]
fn fixed_gmres_at_full_dimension_is_exact() {
    let a = seeded_matrix(12, 9, 5.0);
    let b = seeded_vector(12, 10);
    let x = gmres_fixed(
        &DenseOp(a.clone()),
        &b,
        &[C64::new(0.0, 0.0); 12],
        12,
        |r: &[C64], z: &mut [C64]| z.copy_from_slice(r),
    );
    assert!(rel_err(&x, &dense_solve(&a, &b)) < 1e-10);
}

#[test]
fn fixed_gmres_returns_exact_initial_guess() {
    let a = helmholtz(4.0, 4);
    let x0 = seeded_vector(a.rows(), 11);
    let b = a.spmv(&x0).unwrap();
    let jac = Jacobi::new(&a).unwrap();
    let x = gmres_fixed(&a, &b, &x0, 5, |r: &[C64], z: &mut [C64]| jac.apply_into(r, z));
    assert_eq!(x, x0);
}

#[test]
fn fixed_gmres_one_step_on_scaled_identity() {
    let a: ComplexSparseMatrix = CsrMatrix::from_triplets(6, 6, (0..6).map(|i| (i, i, C64::new(2.0, 0.0))).collect());
    let jac = Jacobi::new(&a).unwrap();
    let b = seeded_vector(6, 12);
    let x = gmres_fixed(&a, &b, &[C64::new(0.0, 0.0); 6], 1, |r: &[C64], z: &mut [C64]| {
        jac.apply_into(r, z)
    });
    let expected: Vec<C64> = b.iter().map(|v| v / 2.0).collect();
    assert!(rel_err(&x, &expected) < 1e-15);
}

#[test]
fn varying_preconditioner_is_tolerated() {
    let a = helmholtz(4.0, 8);
    let jac = Jacobi::new(&a).unwrap();
    let b = seeded_vector(a.rows(), 13);
    let mut calls = 0usize;
    let mut pc = |r: &[C64], z: &mut [C64]| {
        calls += 1;
        let w = 1.0 + 0.5 * (calls % 3) as f64;
        jac.apply_into(r, z);
        z.iter_mut().for_each(|v| *v *= w);
        Ok(())
    };
    let cfg = KrylovConfig {
        rtol: 1e-8,
        ..KrylovConfig::default()
    };
    let (x, trace) = fgmres(&a, &b, &vec![C64::new(0.0, 0.0); b.len()], &cfg, &mut pc).unwrap();
    assert!(trace.converged);
    assert!(rel_err(&a.spmv(&x).unwrap(), &b) <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residuals_never_increase(k in 1.0f64..10.0, n in 2usize..9, seed in 0u64..1000) {
        let a = helmholtz(k, n);
        let b = seeded_vector(a.rows(), seed);
        let x0 = seeded_vector(a.rows(), seed + 1);
        let cfg = KrylovConfig { rtol: 1e-10, maxiter: a.rows(), ..KrylovConfig::default() };
        let (_, trace) = fgmres(&a, &b, &x0, &cfg, &mut IdentityPreconditioner).unwrap();
        let r0 = trace.residuals[0];
        for w in trace.residuals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * r0);
        }
    }
}
