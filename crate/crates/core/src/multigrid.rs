//! Geometric multigrid W-cycle for the CG1 systems solved inside each HSS
//! step. Level operators are rediscretized on every mesh of the hierarchy;
//! transfers are P1 interpolation and its transpose; every level (the
//! coarsest included) is smoothed by Jacobi-preconditioned GMRES.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::assembly::{assemble_mesh, AssembledForms, Cg1Coefficients};
use crate::error::{HelmError, Result};
use crate::krylov::{gmres_fixed, LinearOperator};
use crate::linalgc::vector::{norm2, zeros};
use crate::linalgc::{ComplexSparseMatrix, CsrMatrix, Jacobi, RealSparseMatrix};
use crate::mesh::{build_hierarchy, Mesh, MeshHierarchy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MgConfig {
    pub levels: usize,
    /// GMRES smoothing steps before and after the coarse correction; the
    /// coarsest level gets twice this many.
    pub smooth: usize,
    /// W-cycles per inner solve.
    pub cycles: usize,
}

impl MgConfig {
    pub fn primal() -> Self {
        MgConfig {
            levels: 4,
            smooth: 5,
            cycles: 1,
        }
    }

    pub fn mixed() -> Self {
        MgConfig {
            levels: 4,
            smooth: 4,
            cycles: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(HelmError::InvalidConfig("multigrid needs at least 2 levels".into()));
        }
        if self.smooth == 0 || self.cycles == 0 {
            return Err(HelmError::InvalidConfig(
                "multigrid smoothing steps and cycles must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig::primal()
    }
}

/// P1 interpolation from `coarse` to its uniform refinement `fine`.
///
/// Fine vertices that coincide with coarse ones copy them; the others sit
/// at midpoints of horizontal, vertical or (lower-left to upper-right)
/// diagonal coarse edges and average the two endpoints.
pub fn build_prolongation(coarse: &Mesh, fine: &Mesh) -> Result<RealSparseMatrix> {
    if fine.n != 2 * coarse.n {
        return Err(HelmError::NotNested {
            coarse: coarse.n,
            fine: fine.n,
        });
    }
    let mut t = Vec::with_capacity(2 * fine.num_vertices());
    for fy in 0..=fine.n {
        for fx in 0..=fine.n {
            let row = fine.vertex_index(fx, fy);
            let (cx, cy) = (fx / 2, fy / 2);
            match (fx % 2, fy % 2) {
                (0, 0) => t.push((row, coarse.vertex_index(cx, cy), 1.0)),
                (1, 0) => {
                    t.push((row, coarse.vertex_index(cx, cy), 0.5));
                    t.push((row, coarse.vertex_index(cx + 1, cy), 0.5));
                }
                (0, 1) => {
                    t.push((row, coarse.vertex_index(cx, cy), 0.5));
                    t.push((row, coarse.vertex_index(cx, cy + 1), 0.5));
                }
                _ => {
                    t.push((row, coarse.vertex_index(cx, cy), 0.5));
                    t.push((row, coarse.vertex_index(cx + 1, cy + 1), 0.5));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(fine.num_vertices(), coarse.num_vertices(), t))
}

#[derive(Debug, Clone)]
pub struct MgLevel {
    pub n: usize,
    pub operator: ComplexSparseMatrix,
    pub jacobi: Jacobi,
    /// Interpolation from the next coarser level (absent on the coarsest).
    pub prolongation: Option<RealSparseMatrix>,
    pub restriction: Option<RealSparseMatrix>,
}

/// Level data ordered from coarsest to finest.
#[derive(Debug, Clone)]
pub struct MgHierarchy {
    pub levels: Vec<MgLevel>,
    pub smooth: usize,
}

impl MgHierarchy {
    /// Rediscretizes `coefficients` on every level of `meshes`. `finest`
    /// may supply already assembled forms for the finest mesh.
    pub fn build(
        meshes: &MeshHierarchy,
        coefficients: Cg1Coefficients,
        smooth: usize,
        finest: Option<&AssembledForms>,
    ) -> Result<Self> {
        if smooth == 0 {
            return Err(HelmError::InvalidConfig("smoothing steps must be at least 1".into()));
        }
        let nl = meshes.num_levels();
        let mut levels = Vec::with_capacity(nl);
        for (l, mesh) in meshes.levels.iter().enumerate() {
            let operator = match finest {
                Some(f) if l + 1 == nl && f.n == mesh.n => coefficients.assemble(f),
                _ => coefficients.assemble(&assemble_mesh(mesh)),
            };
            let jacobi = Jacobi::new(&operator)?;
            let (prolongation, restriction) = if l == 0 {
                (None, None)
            } else {
                let p = build_prolongation(&meshes.levels[l - 1], mesh)?;
                let r = p.transpose();
                (Some(p), Some(r))
            };
            levels.push(MgLevel {
                n: mesh.n,
                operator,
                jacobi,
                prolongation,
                restriction,
            });
        }
        Ok(MgHierarchy { levels, smooth })
    }

    /// Hierarchy with `levels` levels whose finest mesh has `n_fine` cells per
    /// direction.
    pub fn for_resolution(
        n_fine: usize,
        levels: usize,
        coefficients: Cg1Coefficients,
        smooth: usize,
        finest: Option<&AssembledForms>,
    ) -> Result<Self> {
        let meshes = build_hierarchy(n_fine, levels)?;
        Self::build(&meshes, coefficients, smooth, finest)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MgLevel {
        self.levels.last().expect("non-empty hierarchy")
    }

    fn smooth_on(&self, level: usize, b: &[C64], x: &[C64], iters: usize) -> Vec<C64> {
        let lv = &self.levels[level];
        gmres_fixed(&lv.operator, b, x, iters, |r: &[C64], z: &mut [C64]| {
            lv.jacobi.apply_into(r, z)
        })
    }

    /// One W-cycle on `level` for `A_level x = b`, starting from `x`.
    pub fn w_cycle(&self, level: usize, b: &[C64], x: &[C64]) -> Vec<C64> {
        if level == 0 {
            return self.smooth_on(0, b, x, 2 * self.smooth);
        }
        let lv = &self.levels[level];
        let mut x = self.smooth_on(level, b, x, self.smooth);

        let mut r = zeros(b.len());
        lv.operator.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let restriction = lv.restriction.as_ref().expect("fine level has transfers");
        let rc = restriction.spmv(&r).expect("restriction size");
        let mut ec = zeros(rc.len());
        for _ in 0..2 {
            ec = self.w_cycle(level - 1, &rc, &ec);
        }
        let prolongation = lv.prolongation.as_ref().expect("fine level has transfers");
        let ef = prolongation.spmv(&ec).expect("prolongation size");
        for (xi, ei) in x.iter_mut().zip(&ef) {
            *xi += ei;
        }
        self.smooth_on(level, b, &x, self.smooth)
    }

    fn finest_residual(&self, b: &[C64], x: &[C64]) -> f64 {
        let a = &self.finest().operator;
        let mut r = zeros(b.len());
        a.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(&r)
    }

    /// `cycles` W-cycles on the finest level from a zero initial guess.
    /// Returns the iterate and the finest-level residual norm before the
    /// first and after every cycle.
    pub fn solve(&self, b: &[C64], cycles: usize) -> (Vec<C64>, Vec<f64>) {
        let top = self.num_levels() - 1;
        let mut x = zeros(b.len());
        let mut residuals = Vec::with_capacity(cycles + 1);
        residuals.push(norm2(b));
        for _ in 0..cycles {
            x = self.w_cycle(top, b, &x);
            residuals.push(self.finest_residual(b, &x));
        }
        (x, residuals)
    }
}

/// `cycles` W-cycles from zero for the finest-level system.
pub fn mg_solve_hss(hier: &MgHierarchy, b: &[C64], cycles: usize) -> Vec<C64> {
    hier.solve(b, cycles).0
}

/// Writes per-cycle contraction factors as CSV `cycle,contraction`.
pub fn write_cycle_log(path: &Path, contractions: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "cycle,contraction")?;
    for (i, c) in contractions.iter().enumerate() {
        writeln!(w, "{},{c:.17e}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}
