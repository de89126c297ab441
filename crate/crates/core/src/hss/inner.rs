//! Solvers for the CG1 system of one HSS step, selectable by name.

use num_complex::Complex64 as C64;

use crate::assembly::{AssembledForms, Cg1Coefficients};
use crate::error::{HelmError, Result};
use crate::krylov::{fgmres, IdentityPreconditioner, KrylovConfig};
use crate::linalgc::direct::{factorization_registry, DirectFactorization, FactorRequest};
use crate::linalgc::{ComplexSparseMatrix, Jacobi};
use crate::multigrid::{MgConfig, MgHierarchy};
use crate::registry::Registry;

/// Counters shared by all inner solves of one preconditioner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InnerStats {
    pub solves: usize,
    pub cycles: usize,
    /// Sum of `ln(r_after / r_before)` over cycles with nonzero residuals.
    pub log_contraction: f64,
    pub contraction_samples: usize,
    /// Per-cycle contraction factors, kept only when `record_cycles` is set.
    pub cycle_contractions: Vec<f64>,
    pub record_cycles: bool,
}

impl InnerStats {
    /// Geometric-mean residual contraction per W-cycle.
    pub fn eta_mg(&self) -> Option<f64> {
        (self.contraction_samples > 0).then(|| (self.log_contraction / self.contraction_samples as f64).exp())
    }
}

pub trait InnerSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Approximates the solution of the step system for `b`.
    fn solve(&self, b: &[C64], stats: &mut InnerStats) -> Result<Vec<C64>>;
}

/// Everything a backend may need to set itself up.
pub struct InnerRequest<'a> {
    /// Forms on the finest (computational) mesh.
    pub forms: &'a AssembledForms,
    pub coefficients: Cg1Coefficients,
    /// Direct factorization backend name (see `factorization_registry`).
    pub factorization: &'a str,
    pub mg: MgConfig,
}

pub type InnerFactory = fn(&InnerRequest<'_>) -> Result<Box<dyn InnerSolver>>;

/// Relative tolerance of the iterative fallback used when a factorization
/// hits a small pivot.
pub const FALLBACK_RTOL: f64 = 1e-12;

enum DirectBackend {
    Factored(Box<dyn DirectFactorization>),
    /// Jacobi-preconditioned FGMRES, used after a pivot breakdown.
    Iterative {
        matrix: ComplexSparseMatrix,
        jacobi: Option<Jacobi>,
    },
}

pub struct DirectInner {
    backend: DirectBackend,
}

impl DirectInner {
    pub fn new(req: &InnerRequest<'_>) -> Result<Self> {
        let matrix = req.coefficients.assemble(req.forms);
        Self::from_matrix(matrix, Some(req.forms.n), req.factorization)
    }

    /// Factors `matrix` with the named backend. A small-pivot breakdown
    /// switches to FGMRES to `FALLBACK_RTOL` and is logged.
    pub fn from_matrix(matrix: ComplexSparseMatrix, lattice: Option<usize>, factorization: &str) -> Result<Self> {
        let registry = factorization_registry();
        let factory = registry.get(factorization)?;
        let backend = match factory(&FactorRequest {
            matrix: &matrix,
            lattice,
        }) {
            Ok(factor) => {
                log::debug!("inner direct solver: {} on {} dofs", factor.name(), factor.dim());
                DirectBackend::Factored(factor)
            }
            Err(HelmError::SmallPivot { index, magnitude }) => {
                log::warn!(
                    "{factorization} factorization broke down at row {index} (|pivot| = {magnitude:e}); \
                     inner solves fall back to FGMRES with rtol {FALLBACK_RTOL:e}"
                );
                let jacobi = Jacobi::new(&matrix).ok();
                DirectBackend::Iterative { matrix, jacobi }
            }
            Err(e) => return Err(e),
        };
        Ok(DirectInner { backend })
    }

    pub fn backend(&self) -> &'static str {
        match &self.backend {
            DirectBackend::Factored(f) => f.name(),
            DirectBackend::Iterative { .. } => "fgmres-fallback",
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.backend, DirectBackend::Iterative { .. })
    }
}

impl InnerSolver for DirectInner {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn dim(&self) -> usize {
        match &self.backend {
            DirectBackend::Factored(f) => f.dim(),
            DirectBackend::Iterative { matrix, .. } => matrix.rows(),
        }
    }

    fn solve(&self, b: &[C64], stats: &mut InnerStats) -> Result<Vec<C64>> {
        stats.solves += 1;
        match &self.backend {
            DirectBackend::Factored(f) => Ok(f.solve(b)),
            DirectBackend::Iterative { matrix, jacobi } => {
                let cfg = KrylovConfig {
                    rtol: FALLBACK_RTOL,
                    maxiter: matrix.rows().max(1),
                    ..KrylovConfig::default()
                };
                let x0 = vec![C64::new(0.0, 0.0); b.len()];
                let (x, trace) = match jacobi {
                    Some(j) => {
                        let mut pc = |r: &[C64], z: &mut [C64]| {
                            j.apply_into(r, z);
                            Ok(())
                        };
                        fgmres(matrix, b, &x0, &cfg, &mut pc)?
                    }
                    None => fgmres(matrix, b, &x0, &cfg, &mut IdentityPreconditioner)?,
                };
                if !trace.converged {
                    log::warn!("fallback inner solve stopped after {} iterations", trace.iterations);
                }
                Ok(x)
            }
        }
    }
}

pub struct MgInner {
    pub hierarchy: MgHierarchy,
    pub cycles: usize,
}

impl MgInner {
    pub fn new(req: &InnerRequest<'_>) -> Result<Self> {
        req.mg.validate()?;
        let hierarchy = MgHierarchy::for_resolution(
            req.forms.n,
            req.mg.levels,
            req.coefficients,
            req.mg.smooth,
            Some(req.forms),
        )?;
        Ok(MgInner {
            hierarchy,
            cycles: req.mg.cycles,
        })
    }
}

impl InnerSolver for MgInner {
    fn name(&self) -> &'static str {
        "mg"
    }

    fn dim(&self) -> usize {
        self.hierarchy.finest().operator.rows()
    }

    fn solve(&self, b: &[C64], stats: &mut InnerStats) -> Result<Vec<C64>> {
        stats.solves += 1;
        let (x, res) = self.hierarchy.solve(b, self.cycles);
        for w in res.windows(2) {
            stats.cycles += 1;
            if w[0] > 0.0 && w[1] > 0.0 {
                let ratio = w[1] / w[0];
                stats.log_contraction += ratio.ln();
                stats.contraction_samples += 1;
                if stats.record_cycles {
                    stats.cycle_contractions.push(ratio);
                }
            }
        }
        Ok(x)
    }
}

fn direct(req: &InnerRequest<'_>) -> Result<Box<dyn InnerSolver>> {
    Ok(Box::new(DirectInner::new(req)?))
}

fn multigrid(req: &InnerRequest<'_>) -> Result<Box<dyn InnerSolver>> {
    Ok(Box::new(MgInner::new(req)?))
}

/// Built-in inner solvers: `direct` and `mg`.
pub fn inner_solver_registry() -> Registry<InnerFactory> {
    let mut r: Registry<InnerFactory> = Registry::new("inner solver");
    r.register("direct", direct).register("mg", multigrid);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalgc::CsrMatrix;

    #[test]
    fn zero_pivot_falls_back_to_iterative_solve() {
        let c = |v: f64| C64::new(v, 0.0);
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 1, c(1.0)),
                (1, 0, c(1.0)),
                (1, 1, c(2.0)),
                (1, 2, c(1.0)),
                (2, 1, c(1.0)),
                (2, 2, c(3.0)),
            ],
        );
        let inner = DirectInner::from_matrix(a.clone(), None, "banded-lu").unwrap();
        assert!(inner.is_fallback());
        assert_eq!(inner.backend(), "fgmres-fallback");
        let b = vec![c(1.0), c(-2.0), c(0.5)];
        let mut stats = InnerStats::default();
        let x = inner.solve(&b, &mut stats).unwrap();
        let r = a.spmv(&x).unwrap();
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert_eq!(stats.solves, 1);
    }
}
