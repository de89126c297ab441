//! Self-verification suite: small-size oracles, contraction bounds, a
//! mutation check and the k = 16 reference rows.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::reference as refv;
use super::{ExperimentConfig, ExperimentSetup};
use crate::assembly::{
    assemble_mesh, edge_mass, hss_primal_coefficients, primal_coefficients, AssembledForms, ElementMatrices, Source,
};
use crate::error::Result;
use crate::hss::{
    contraction_bound, formulation_registry, inner_solver_registry, measure_contraction, HssFormulation,
    HssPreconditioner, InnerRequest, InnerSolver, PrimalHss,
};
use crate::krylov::{fgmres, IdentityPreconditioner, KrylovConfig};
use crate::linalgc::vector::{norm2, random_vector, sub};
use crate::linalgc::{dense_lu_solve, factorization_registry, ComplexSparseMatrix, FactorRequest};
use crate::mesh::{build_mesh, resolution_for};
use crate::multigrid::MgConfig;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckResult::new(name, passed, detail),
            Err(e) => CheckResult::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} checks, {} failed", self.checks.len(), failed);
        out
    }

    fn push(&mut self, c: CheckResult) {
        log::info!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        self.checks.push(c);
    }
}

/// Closed-form element matrices of the reference triangle (0,0), (1,0), (0,1).
fn check_element_matrices() -> (bool, String) {
    let e = ElementMatrices::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let stiff = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let mut err: f64 = (e.area - 0.5).abs();
    for i in 0..3 {
        for j in 0..3 {
            let m = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
            err = err
                .max((e.mass[i][j] - m).abs())
                .max((e.stiffness[i][j] - stiff[i][j]).abs());
        }
    }
    let edge = edge_mass(0.25);
    err = err
        .max((edge[0][0] - 0.25 / 3.0).abs())
        .max((edge[0][1] - 0.25 / 6.0).abs());
    (err <= 1e-14, format!("max deviation {err:.2e}"))
}

fn check_global_sums() -> (bool, String) {
    let forms = assemble_mesh(&build_mesh(8).expect("valid resolution"));
    let ones = vec![1.0; forms.num_cg1()];
    let k1 = forms.stiffness.spmv(&ones).expect("square");
    let k1_max = k1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (m, mg) = (forms.mass.sum(), forms.boundary_mass.sum());
    let ok = k1_max <= 1e-13 && (m - 1.0).abs() <= 1e-13 && (mg - 4.0).abs() <= 1e-13;
    (
        ok,
        format!("max |K 1| = {k1_max:.1e}, sum M = {m:.15}, sum MGamma = {mg:.15}"),
    )
}

fn dense_solve_error(matrix: &ComplexSparseMatrix, lattice: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let b = random_vector(matrix.rows(), rng);
    let reference = dense_lu_solve(&matrix.to_dense(), &b)?;
    let mut worst: f64 = 0.0;
    for name in ["banded-lu", "nd-ldlt"] {
        let f = (factorization_registry().get(name)?)(&FactorRequest {
            matrix,
            lattice: Some(lattice),
        })?;
        let x = f.solve(&b);
        worst = worst.max(norm2(&sub(&x, &reference)) / norm2(&reference));
    }
    Ok(worst)
}

/// Both factorization backends against dense elimination on the assembled
/// Helmholtz and HSS step matrices for n <= 8.
fn check_lu_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8] {
        let forms = assemble_mesh(&build_mesh(n)?);
        for k in [4.0, 8.0] {
            let (lhs, _) = hss_primal_coefficients(k, 2.0);
            for c in [primal_coefficients(k, 0.0), lhs] {
                worst = worst.max(dense_solve_error(&c.assemble(&forms), n, &mut rng)?);
            }
        }
    }
    Ok((worst <= refv::LU_ORACLE_TOL, format!("max relative error {worst:.2e}")))
}

fn small_primal_system(k: f64, n: usize) -> Result<(ComplexSparseMatrix, Vec<C64>, Vec<C64>)> {
    let forms = assemble_mesh(&build_mesh(n)?);
    let a = primal_coefficients(k, 0.0).assemble(&forms);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = random_vector(a.rows(), &mut rng);
    let x0 = random_vector(a.rows(), &mut rng);
    Ok((a, b, x0))
}

fn check_gmres_monotone() -> Result<(bool, String)> {
    let (a, b, x0) = small_primal_system(8.0, 8)?;
    let cfg = KrylovConfig {
        rtol: 1e-10,
        maxiter: a.rows(),
        ..KrylovConfig::default()
    };
    let (_, trace) = fgmres(&a, &b, &x0, &cfg, &mut IdentityPreconditioner)?;
    let worst_rise = trace
        .residuals
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        trace.converged && worst_rise <= 1e-12,
        format!(
            "{} iterations, largest relative increase {worst_rise:.1e}",
            trace.iterations
        ),
    ))
}

fn check_gmres_exact_preconditioner() -> Result<(bool, String)> {
    let (a, b, x0) = small_primal_system(8.0, 8)?;
    let lu = (factorization_registry().get("banded-lu")?)(&FactorRequest {
        matrix: &a,
        lattice: Some(8),
    })?;
    let mut pc = |r: &[C64], z: &mut [C64]| {
        z.copy_from_slice(r);
        lu.solve_in_place(z);
        Ok(())
    };
    let cfg = KrylovConfig {
        rtol: 1e-10,
        ..KrylovConfig::default()
    };
    let (_, trace) = fgmres(&a, &b, &x0, &cfg, &mut pc)?;
    Ok((
        trace.converged && trace.iterations == 1,
        format!("{} iteration(s)", trace.iterations),
    ))
}

fn forms_for(k: f64, levels: usize) -> Result<Arc<AssembledForms>> {
    Ok(Arc::new(assemble_mesh(&build_mesh(resolution_for(k, 1.0, levels))?)))
}

fn inner_for(f: &dyn HssFormulation, inner: &str, mg: MgConfig) -> Result<Box<dyn InnerSolver>> {
    (inner_solver_registry().get(inner)?)(&InnerRequest {
        forms: f.forms(),
        coefficients: f.inner_coefficients(),
        factorization: "auto",
        mg,
    })
}

/// Single-step and `ceil(k)`-step H-norm reductions over 20 random errors.
/// Exact inner solves are checked against a random exact solution, inexact
/// ones against the zero solution (see `measure_contraction`).
pub fn contraction_check(
    f: &dyn HssFormulation,
    inner: &dyn InnerSolver,
    slack: f64,
    seed: u64,
) -> Result<(bool, String)> {
    let k = f.k();
    let bound = contraction_bound(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solution_scale = if inner.name() == "direct" { 1.0 } else { 0.0 };
    let s = measure_contraction(f, inner, solution_scale, 20, 2, k.ceil() as usize, &mut rng)?;
    let batched_limit = (-1.0f64).exp() + refv::BATCHED_SLACK;
    let ok = s.max_step_ratio <= bound + slack && s.max_batched_ratio <= batched_limit;
    Ok((
        ok,
        format!(
            "step ratio {:.6} (bound {:.6}), {}-step reduction {:.4} (limit {:.4})",
            s.max_step_ratio, bound, s.batched_steps, s.max_batched_ratio, batched_limit
        ),
    ))
}

fn check_contraction(formulation: &str, k: f64) -> Result<(bool, String)> {
    let f = (formulation_registry().get(formulation)?)(forms_for(k, 1)?, k, 2.0)?;
    let inner = inner_for(&*f, "direct", MgConfig::primal())?;
    contraction_check(&*f, &*inner, refv::CONTRACTION_SLACK, k as u64)
}

fn check_contraction_mg() -> Result<(bool, String)> {
    let k = 16.0;
    let mg = MgConfig::primal();
    let f = PrimalHss::new(forms_for(k, mg.levels)?, k, 2.0)?;
    let inner = inner_for(&f, "mg", mg)?;
    contraction_check(&f, &*inner, refv::CONTRACTION_SLACK_MG, 3)
}

/// A step prefactor of `(k - 2) / (k + 1)` must make the contraction check
/// fail.
fn check_mutation_detected() -> Result<(bool, String)> {
    let k = 16.0;
    let f = PrimalHss::with_rhs_prefactor(forms_for(k, 1)?, k, 2.0, (k - 2.0) / (k + 1.0))?;
    let inner = inner_for(&f, "direct", MgConfig::primal())?;
    let (passed, detail) = contraction_check(&f, &*inner, refv::CONTRACTION_SLACK, 16)?;
    Ok((!passed, format!("mutated step: {detail}")))
}

fn check_inner_structure() -> Result<(bool, String)> {
    let (k, dh) = (8.0, 2.0);
    let forms = forms_for(k, 1)?;
    let primal = (formulation_registry().get("primal")?)(forms.clone(), k, dh)?;
    let mixed = (formulation_registry().get("mixed")?)(forms.clone(), k, dh)?;
    let (p, m) = (
        primal.inner_coefficients().assemble(&forms),
        mixed.inner_coefficients().assemble(&forms),
    );
    let same = p.same_pattern(&m) && p.same_pattern(&forms.stiffness);
    let (pc, mc) = (primal.inner_coefficients(), mixed.inner_coefficients());
    let i = C64::new(0.0, 1.0);
    let expected_mixed = [k * k * (dh - i) * (dh - i), k * k * (dh - i)];
    let expected_primal = [-2.0 * dh * k * k * i + dh * dh - k * k, -k * k * i + dh];
    let dev = [
        (mc.mass - expected_mixed[0]).norm(),
        (mc.boundary - expected_mixed[1]).norm(),
        (pc.mass - expected_primal[0]).norm(),
        (pc.boundary - expected_primal[1]).norm(),
        (pc.stiffness - 1.0).norm(),
        (mc.stiffness - 1.0).norm(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    Ok((
        same && dev <= 1e-12,
        format!("shared pattern: {same}, coefficient deviation {dev:.1e}"),
    ))
}

fn check_preconditioner_determinism() -> Result<(bool, String)> {
    let k = 8.0;
    let f = PrimalHss::new(forms_for(k, 1)?, k, 2.0)?;
    let inner = inner_for(&f, "direct", MgConfig::primal())?;
    let mut pc = HssPreconditioner::new(&f, &*inner, 8)?;
    let r = random_vector(f.dim(), &mut ChaCha8Rng::seed_from_u64(9));
    let (a, b) = (pc.apply_to(&r)?, pc.apply_to(&r)?);
    Ok((a == b, "two applications to one vector compared bitwise".into()))
}

fn check_zero_source() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        source: Source::Zero,
        ..ExperimentConfig::default()
    };
    let out = ExperimentSetup::new(&cfg)?.run()?;
    let zero = out.state.iter().all(|v| *v == C64::new(0.0, 0.0));
    Ok((
        zero && out.report.outer_its == 0,
        format!("{} outer iterations, zero solution: {zero}", out.report.outer_its),
    ))
}

fn count_check(name: String, measured: usize, expected: (usize, usize), tol: usize) -> CheckResult {
    let range = if expected.0 == expected.1 {
        format!("{}", expected.0)
    } else {
        format!("{}-{}", expected.0, expected.1)
    };
    CheckResult::new(
        name,
        refv::count_within(measured, expected, tol),
        format!("{measured} outer iterations (reference {range} +/- {tol})"),
    )
}

/// Reference-row checks at k = 16.
fn reference_rows(report: &mut VerifyReport) {
    let k = refv::WAVENUMBERS[0];
    let runs: [(&str, &str, MgConfig); 4] = [
        ("primal", "direct", MgConfig::primal()),
        ("mixed", "direct", MgConfig::mixed()),
        ("primal", "mg", MgConfig::primal()),
        ("mixed", "mg", MgConfig::mixed()),
    ];
    for (formulation, inner, mg) in runs {
        let cfg = ExperimentConfig {
            formulation: formulation.into(),
            inner: inner.into(),
            mg,
            k,
            ..ExperimentConfig::default()
        };
        let setup = match ExperimentSetup::new(&cfg) {
            Ok(s) => s,
            Err(e) => {
                report.push(CheckResult::new(
                    format!("k=16 {formulation} {inner} setup"),
                    false,
                    e.to_string(),
                ));
                continue;
            }
        };
        let thetas: &[f64] = if formulation == "primal" && inner == "direct" {
            &[0.5, 1.0, 1.5]
        } else {
            &[1.0]
        };
        for &theta in thetas {
            for source in [Source::Uniform, Source::Box] {
                let name = format!("k=16 {formulation} {inner} {} theta={theta}", source.name());
                let r = match setup.run_with(source, theta, cfg.seed) {
                    Ok(o) => o.report,
                    Err(e) => {
                        report.push(CheckResult::new(name, false, e.to_string()));
                        continue;
                    }
                };
                let (expected, tol) = match (formulation, theta) {
                    ("mixed", _) => ((refv::MIXED_THETA_ONE[0], refv::MIXED_THETA_ONE[0]), refv::COUNT_TOL),
                    (_, 0.5) => (refv::PRIMAL_THETA_HALF[0], refv::THETA_HALF_TOL),
                    (_, 1.5) => {
                        let c = refv::PRIMAL_THETA_THREE_HALVES[0];
                        ((c, c), refv::COUNT_TOL)
                    }
                    _ => ((refv::PRIMAL_THETA_ONE[0], refv::PRIMAL_THETA_ONE[0]), refv::COUNT_TOL),
                };
                report.push(count_check(name.clone(), r.outer_its, expected, tol));
                let per_step = if inner == "mg" {
                    r.n_inner * mg.cycles
                } else {
                    r.n_inner
                };
                report.push(CheckResult::new(
                    format!("{name} accounting"),
                    r.bracket_total() == r.outer_its * per_step,
                    format!("{} = {} x {per_step}", r.bracket_total(), r.outer_its),
                ));
                if inner == "direct" && theta == 1.0 {
                    let nu = contraction_bound(k);
                    let eta_s = r.eta_s.unwrap_or(f64::NAN);
                    report.push(CheckResult::new(
                        format!("{name} eta_s"),
                        eta_s <= nu && eta_s >= nu - refv::ETA_S_BAND,
                        format!("{eta_s:.4} (nu_s {nu:.4})"),
                    ));
                }
                if formulation == "primal" && inner == "direct" && theta == 1.0 && source == Source::Uniform {
                    let eta_h = r.eta_h.unwrap_or(f64::NAN);
                    report.push(CheckResult::new(
                        format!("{name} eta_h"),
                        (eta_h - refv::ETA_H[0]).abs() <= refv::ETA_H_TOL,
                        format!("{eta_h:.4} (reference {:.4} +/- {})", refv::ETA_H[0], refv::ETA_H_TOL),
                    ));
                }
            }
        }
    }
}

/// Runs every check. Each failure is reported, none aborts the suite.
pub fn verify_suite() -> VerifyReport {
    let mut report = VerifyReport::default();
    let (ok, detail) = check_element_matrices();
    report.push(CheckResult::new("element matrices", ok, detail));
    let (ok, detail) = check_global_sums();
    report.push(CheckResult::new("assembled sums", ok, detail));
    report.push(CheckResult::from_result(
        "factorizations vs dense LU",
        check_lu_oracle(),
    ));
    report.push(CheckResult::from_result(
        "gmres residual monotone",
        check_gmres_monotone(),
    ));
    report.push(CheckResult::from_result(
        "gmres exact preconditioner",
        check_gmres_exact_preconditioner(),
    ));
    for formulation in ["primal", "mixed"] {
        for k in [8.0, 16.0, 32.0] {
            report.push(CheckResult::from_result(
                &format!("{formulation} contraction k={k}"),
                check_contraction(formulation, k),
            ));
        }
    }
    report.push(CheckResult::from_result(
        "primal contraction k=16 mg",
        check_contraction_mg(),
    ));
    report.push(CheckResult::from_result(
        "mutated prefactor detected",
        check_mutation_detected(),
    ));
    report.push(CheckResult::from_result(
        "inner system structure",
        check_inner_structure(),
    ));
    report.push(CheckResult::from_result(
        "preconditioner determinism",
        check_preconditioner_determinism(),
    ));
    report.push(CheckResult::from_result("zero source", check_zero_source()));
    reference_rows(&mut report);
    report
}
