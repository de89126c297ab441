mod common;

use common::{rel_err, seeded_vector};
use helmhss::assembly::{assemble_mesh, hss_primal_coefficients, Cg1Coefficients};
use helmhss::krylov::{gmres_fixed, LinearOperator};
use helmhss::linalgc::vector::{norm2, sub};
use helmhss::linalgc::BandedLU;
use helmhss::mesh::{build_hierarchy, build_mesh};
use helmhss::multigrid::{build_prolongation, mg_solve_hss, write_cycle_log, MgHierarchy};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn hss_hierarchy(k: f64, n: usize, levels: usize, smooth: usize) -> MgHierarchy {
    let (lhs, _) = hss_primal_coefficients(k, 2.0);
    MgHierarchy::for_resolution(n, levels, lhs, smooth, None).unwrap()
}

fn residual_norm(h: &MgHierarchy, b: &[C64], x: &[C64]) -> f64 {
    let a = &h.finest().operator;
    let mut ax = vec![C64::new(0.0, 0.0); b.len()];
    a.apply(x, &mut ax);
    norm2(&sub(b, &ax))
}

#[test]
fn zero_rhs_stays_zero() {
    let h = hss_hierarchy(8.0, 16, 3, 3);
    let z = vec![C64::new(0.0, 0.0); h.finest().operator.rows()];
    assert_eq!(h.w_cycle(2, &z, &z), z);
    assert_eq!(mg_solve_hss(&h, &z, 2), z);
}

#[test]
fn one_w_cycle_contracts_strongly_at_k16() {
    let h = hss_hierarchy(16.0, 64, 4, 5);
    let b = seeded_vector(h.finest().operator.rows(), 1);
    let (_, res) = h.solve(&b, 1);
    let ratio = res[1] / res[0];
    assert!(ratio <= 0.05, "contraction {ratio}");
}

#[test]
fn cycles_converge_to_direct_solution() {
    let h = hss_hierarchy(8.0, 32, 4, 5);
    let a = &h.finest().operator;
    let b = seeded_vector(a.rows(), 2);
    let direct = BandedLU::factor(a).unwrap().solve(&b);
    let x = mg_solve_hss(&h, &b, 10);
    assert!(rel_err(&x, &direct) <= 1e-8);
    let (_, res) = h.solve(&b, 2);
    assert!(res[2] <= res[1]);
}

#[test]
fn coarse_correction_beats_smoothing_alone() {
    let coeffs = Cg1Coefficients {
        mass: C64::new(1.0, 0.0),
        boundary: C64::new(0.0, 0.0),
        stiffness: C64::new(1.0, 0.0),
    };
    let h = MgHierarchy::for_resolution(16, 2, coeffs, 2, None).unwrap();
    let fine = h.finest();
    let b = seeded_vector(fine.operator.rows(), 3);
    let zero = vec![C64::new(0.0, 0.0); b.len()];
    let mg = h.w_cycle(1, &b, &zero);
    let smooth_only = gmres_fixed(&fine.operator, &b, &zero, 4, |r: &[C64], z: &mut [C64]| {
        fine.jacobi.apply_into(r, z)
    });
    assert!(residual_norm(&h, &b, &mg) < residual_norm(&h, &b, &smooth_only));
}

#[test]
fn level_operators_are_rediscretized() {
    let (lhs, _) = hss_primal_coefficients(8.0, 2.0);
    let meshes = build_hierarchy(24, 3).unwrap();
    let h = MgHierarchy::build(&meshes, lhs, 2, None).unwrap();
    for (level, mesh) in h.levels.iter().zip(&meshes.levels) {
        let direct = lhs.assemble(&assemble_mesh(mesh));
        assert_eq!(level.operator.to_dense(), direct.to_dense());
        assert_eq!(level.n, mesh.n);
    }
    assert!(h.levels[0].prolongation.is_none());
    let p = h.levels[2].prolongation.as_ref().unwrap();
    assert_eq!(
        h.levels[2].restriction.as_ref().unwrap().to_dense(),
        p.transpose().to_dense()
    );
}

#[test]
fn prolongation_has_full_column_rank_and_unit_rows() {
    let (c, f) = (build_mesh(5).unwrap(), build_mesh(10).unwrap());
    let p = build_prolongation(&c, &f).unwrap();
    let pt = p.transpose();
    for j in 0..c.num_vertices() {
        assert!(!pt.row(j).0.is_empty());
    }
    for cy in 0..=c.n {
        for cx in 0..=c.n {
            let (cols, vals) = p.row(f.vertex_index(2 * cx, 2 * cy));
            assert_eq!(cols, &[c.vertex_index(cx, cy)]);
            assert_eq!(vals, &[1.0]);
        }
    }
    let ones = vec![1.0; c.num_vertices()];
    assert!(p.spmv(&ones).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn cycle_log_format() {
    let dir = std::env::temp_dir().join(format!("helmhss-cycles-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cycles.csv");
    write_cycle_log(&path, &[0.01, 0.002]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cycle,contraction");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prolongation_reproduces_affine_functions(
        n in 1usize..9, a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0
    ) {
        let (coarse, fine) = (build_mesh(n).unwrap(), build_mesh(2 * n).unwrap());
        let p = build_prolongation(&coarse, &fine).unwrap();
        let xc: Vec<f64> = coarse.vertices.iter().map(|v| a + b * v[0] + c * v[1]).collect();
        let xf = p.spmv(&xc).unwrap();
        for (v, val) in fine.vertices.iter().zip(&xf) {
            prop_assert!((a + b * v[0] + c * v[1] - val).abs() < 1e-13);
        }
    }
}
