//! Primal and mixed HSS iterations behind one interface.
//!
//! A state vector is the CG1 coefficient vector `u` (primal) or the stacked
//! `(sigma, u)` with the DG0^2 block first (mixed).

use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::inner::{InnerSolver, InnerStats};
use crate::assembly::{
    hss_mixed_eliminated_coefficients, hss_primal_coefficients, primal_coefficients, AssembledForms, Cg1Coefficients,
    MixedOperator,
};
use crate::error::{HelmError, Result};
use crate::krylov::LinearOperator;
use crate::linalgc::vector::zeros;
use crate::linalgc::ComplexSparseMatrix;
use crate::registry::Registry;

pub trait HssFormulation: Send + Sync {
    fn name(&self) -> &'static str;
    fn k(&self) -> f64;
    fn delta_hat(&self) -> f64;
    fn forms(&self) -> &AssembledForms;
    fn dim(&self) -> usize;

    /// The CG1 system solved once per step.
    fn inner_coefficients(&self) -> Cg1Coefficients;

    /// The unshifted operator the outer Krylov method solves.
    fn outer_operator(&self) -> &dyn LinearOperator;

    /// The shifted operator whose solution the iteration converges to.
    fn shifted_operator(&self) -> &dyn LinearOperator;

    /// Outer right-hand side for a CG1 load vector `<f, v>`.
    fn outer_load(&self, load: &[C64]) -> Vec<C64>;

    /// One HSS step `x_n -> x_{n+1}` for the right-hand side `r`.
    fn step(&self, x: &[C64], r: &[C64], inner: &dyn InnerSolver, stats: &mut InnerStats) -> Result<Vec<C64>>;

    /// Norm in which one step with exact inner solves contracts errors by
    /// `(k - 1) / (k + 1)`.
    fn h_norm(&self, x: &[C64]) -> f64;

    /// The CG1 part of a state.
    fn solution<'a>(&self, x: &'a [C64]) -> &'a [C64];
}

/// `RHS` scale factor `(k - 1) / (k + 1)`.
pub fn cayley_factor(k: f64) -> f64 {
    (k - 1.0) / (k + 1.0)
}

/// Source scale factor `2k / (k + 1)`.
pub fn source_factor(k: f64) -> f64 {
    2.0 * k / (k + 1.0)
}

fn validate(k: f64, delta_hat: f64) -> Result<()> {
    if !(k > 1.0) {
        return Err(HelmError::InvalidConfig(format!("wavenumber must exceed 1, got {k}")));
    }
    if !(delta_hat > 0.0) {
        return Err(HelmError::InvalidConfig(format!(
            "shift must be positive, got {delta_hat}"
        )));
    }
    Ok(())
}

fn quad_form(m: &crate::linalgc::RealSparseMatrix, x: &[C64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.rows() {
        let (cols, vals) = m.row(i);
        let mut s = C64::new(0.0, 0.0);
        for (&j, &v) in cols.iter().zip(vals) {
            s += x[j] * v;
        }
        acc += (x[i].conj() * s).re;
    }
    acc
}

pub struct PrimalHss {
    forms: Arc<AssembledForms>,
    k: f64,
    delta_hat: f64,
    outer: ComplexSparseMatrix,
    shifted: ComplexSparseMatrix,
    rhs_op: ComplexSparseMatrix,
    lhs: Cg1Coefficients,
}

impl PrimalHss {
    pub fn new(forms: Arc<AssembledForms>, k: f64, delta_hat: f64) -> Result<Self> {
        Self::with_rhs_prefactor(forms, k, delta_hat, cayley_factor(k))
    }

    /// Like `new`, but scales the step's right-hand operator by `prefactor`
    /// instead of `(k - 1) / (k + 1)`. Any other value breaks consistency
    /// with the shifted system; used to check that the verification detects
    /// such a change.
    pub fn with_rhs_prefactor(forms: Arc<AssembledForms>, k: f64, delta_hat: f64, prefactor: f64) -> Result<Self> {
        validate(k, delta_hat)?;
        let (lhs, rhs) = hss_primal_coefficients(k, delta_hat);
        let rhs = rhs.scaled(C64::new(prefactor / cayley_factor(k), 0.0));
        Ok(PrimalHss {
            outer: primal_coefficients(k, 0.0).assemble(&forms),
            shifted: primal_coefficients(k, delta_hat).assemble(&forms),
            rhs_op: rhs.assemble(&forms),
            lhs,
            forms,
            k,
            delta_hat,
        })
    }

    /// The step's right-hand operator.
    pub fn rhs_operator(&self) -> &ComplexSparseMatrix {
        &self.rhs_op
    }
}

impl HssFormulation for PrimalHss {
    fn name(&self) -> &'static str {
        "primal"
    }
    fn k(&self) -> f64 {
        self.k
    }
    fn delta_hat(&self) -> f64 {
        self.delta_hat
    }
    fn forms(&self) -> &AssembledForms {
        &self.forms
    }
    fn dim(&self) -> usize {
        self.forms.num_cg1()
    }
    fn inner_coefficients(&self) -> Cg1Coefficients {
        self.lhs
    }
    fn outer_operator(&self) -> &dyn LinearOperator {
        &self.outer
    }
    fn shifted_operator(&self) -> &dyn LinearOperator {
        &self.shifted
    }
    fn outer_load(&self, load: &[C64]) -> Vec<C64> {
        load.to_vec()
    }

    fn step(&self, x: &[C64], r: &[C64], inner: &dyn InnerSolver, stats: &mut InnerStats) -> Result<Vec<C64>> {
        let s = source_factor(self.k);
        let mut rhs = zeros(x.len());
        self.rhs_op.spmv_into(x, &mut rhs);
        for (ri, fi) in rhs.iter_mut().zip(r) {
            *ri += fi * s;
        }
        inner.solve(&rhs, stats)
    }

    /// `||u||^2 = 2 delta k u^H M u + k u^H MGamma u`
    fn h_norm(&self, x: &[C64]) -> f64 {
        let f = &self.forms;
        let v = 2.0 * self.delta_hat * self.k * quad_form(&f.mass, x) + self.k * quad_form(&f.boundary_mass, x);
        v.max(0.0).sqrt()
    }

    fn solution<'a>(&self, x: &'a [C64]) -> &'a [C64] {
        x
    }
}

/// Owned block action of the mixed form.
pub struct MixedBlock {
    forms: Arc<AssembledForms>,
    k: f64,
    delta: f64,
}

impl MixedBlock {
    pub fn new(forms: Arc<AssembledForms>, k: f64, delta: f64) -> Self {
        MixedBlock { forms, k, delta }
    }
}

impl LinearOperator for MixedBlock {
    fn dim(&self) -> usize {
        self.forms.num_dg0() + self.forms.num_cg1()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        MixedOperator::new(&self.forms, self.k, self.delta).apply_into(x, y)
    }
}

pub struct MixedHss {
    forms: Arc<AssembledForms>,
    k: f64,
    delta_hat: f64,
    outer: MixedBlock,
    shifted: MixedBlock,
    lhs: Cg1Coefficients,
}

impl MixedHss {
    pub fn new(forms: Arc<AssembledForms>, k: f64, delta_hat: f64) -> Result<Self> {
        validate(k, delta_hat)?;
        Ok(MixedHss {
            outer: MixedBlock::new(forms.clone(), k, 0.0),
            shifted: MixedBlock::new(forms.clone(), k, delta_hat),
            lhs: hss_mixed_eliminated_coefficients(k, delta_hat),
            forms,
            k,
            delta_hat,
        })
    }

    fn split<'a>(&self, x: &'a [C64]) -> (&'a [C64], &'a [C64]) {
        x.split_at(self.forms.num_dg0())
    }
}

impl HssFormulation for MixedHss {
    fn name(&self) -> &'static str {
        "mixed"
    }
    fn k(&self) -> f64 {
        self.k
    }
    fn delta_hat(&self) -> f64 {
        self.delta_hat
    }
    fn forms(&self) -> &AssembledForms {
        &self.forms
    }
    fn dim(&self) -> usize {
        self.forms.num_dg0() + self.forms.num_cg1()
    }
    fn inner_coefficients(&self) -> Cg1Coefficients {
        self.lhs
    }
    fn outer_operator(&self) -> &dyn LinearOperator {
        &self.outer
    }
    fn shifted_operator(&self) -> &dyn LinearOperator {
        &self.shifted
    }

    /// `F_sigma = 0`, `F_u = <f, v> / (0 - ik)`.
    fn outer_load(&self, load: &[C64]) -> Vec<C64> {
        let z = C64::new(0.0, -self.k);
        let mut out = zeros(self.dim());
        for (o, l) in out[self.forms.num_dg0()..].iter_mut().zip(load) {
            *o = l / z;
        }
        out
    }

    fn step(&self, x: &[C64], r: &[C64], inner: &dyn InnerSolver, stats: &mut InnerStats) -> Result<Vec<C64>> {
        let f = &*self.forms;
        let (k, dh) = (self.k, self.delta_hat);
        let (c, s) = (cayley_factor(k), source_factor(k));
        let (sigma, u) = self.split(x);
        let (r_sigma, r_u) = self.split(r);
        let plus = k * C64::new(dh, 1.0);
        let minus = k * C64::new(dh, -1.0);

        // g = c (k(dh + i) sigma + grad u) + s Msigma^{-1} R_sigma, cellwise
        let grad_u = f.cell_gradient(u);
        let g: Vec<C64> = (0..sigma.len())
            .map(|j| c * (plus * sigma[j] + grad_u[j]) + s * r_sigma[j] / f.sigma_mass[j])
            .collect();

        // Q-row right-hand side: c (k(dh + i) M u - G^T sigma + k MGamma u) + s R_u
        let nv = u.len();
        let gt_sigma = f.gradient_t.spmv(sigma)?;
        let mut rhs = zeros(nv);
        for i in 0..nv {
            let (cols, mv) = f.mass.row(i);
            let bv = f.boundary_mass.row(i).1;
            let mut acc = C64::new(0.0, 0.0);
            for ((&j, &m), &b) in cols.iter().zip(mv).zip(bv) {
                acc += u[j] * (plus * m + k * b);
            }
            rhs[i] = c * (acc - gt_sigma[i]) + s * r_u[i];
        }

        // Eliminated system: L u' = k(dh - i) rhs - G^T g
        let gt_g = f.gradient_t.spmv(&g)?;
        for (ri, gi) in rhs.iter_mut().zip(&gt_g) {
            *ri = minus * *ri - gi;
        }
        let u_next = inner.solve(&rhs, stats)?;

        let grad_next = f.cell_gradient(&u_next);
        let mut out = Vec::with_capacity(x.len());
        out.extend(g.iter().zip(&grad_next).map(|(gi, di)| (gi + di) / minus));
        out.extend_from_slice(&u_next);
        Ok(out)
    }

    /// `||(sigma, u)||^2 = dh sigma^H Msigma sigma + dh u^H M u + u^H MGamma u`
    fn h_norm(&self, x: &[C64]) -> f64 {
        let f = &self.forms;
        let (sigma, u) = self.split(x);
        let s: f64 = sigma.iter().zip(&f.sigma_mass).map(|(v, m)| v.norm_sqr() * m).sum();
        let v = self.delta_hat * s + self.delta_hat * quad_form(&f.mass, u) + quad_form(&f.boundary_mass, u);
        v.max(0.0).sqrt()
    }

    fn solution<'a>(&self, x: &'a [C64]) -> &'a [C64] {
        self.split(x).1
    }
}

pub type FormulationFactory = fn(Arc<AssembledForms>, f64, f64) -> Result<Box<dyn HssFormulation>>;

fn primal(forms: Arc<AssembledForms>, k: f64, dh: f64) -> Result<Box<dyn HssFormulation>> {
    Ok(Box::new(PrimalHss::new(forms, k, dh)?))
}

fn mixed(forms: Arc<AssembledForms>, k: f64, dh: f64) -> Result<Box<dyn HssFormulation>> {
    Ok(Box::new(MixedHss::new(forms, k, dh)?))
}

/// Built-in formulations: `primal` and `mixed`.
pub fn formulation_registry() -> Registry<FormulationFactory> {
    let mut r: Registry<FormulationFactory> = Registry::new("formulation");
    r.register("primal", primal).register("mixed", mixed);
    r
}
