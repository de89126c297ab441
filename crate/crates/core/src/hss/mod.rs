//! The gamma = k HSS iteration for shifted systems and the shifted-HSS
//! preconditioner for the unshifted one, with rate instrumentation.

pub mod formulation;
pub mod inner;

use num_complex::Complex64 as C64;

use crate::error::{HelmError, Result};
use crate::krylov::{IterationTrace, Preconditioner};
use crate::linalgc::vector::{norm2, random_vector, sub, zeros};

pub use formulation::{
    cayley_factor, formulation_registry, source_factor, HssFormulation, MixedBlock, MixedHss, PrimalHss,
};
pub use inner::{inner_solver_registry, DirectInner, InnerRequest, InnerSolver, InnerStats, MgInner};

/// Parameters of the shifted-HSS preconditioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HssConfig {
    pub k: f64,
    pub delta_hat: f64,
    pub theta: f64,
}

impl HssConfig {
    pub fn n_inner(&self) -> usize {
        n_inner(self.k, self.theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 1.0) {
            return Err(HelmError::InvalidConfig(format!(
                "wavenumber must exceed 1, got {}",
                self.k
            )));
        }
        if !(self.delta_hat > 0.0) {
            return Err(HelmError::InvalidConfig(format!(
                "shift must be positive, got {}",
                self.delta_hat
            )));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(HelmError::InvalidConfig(format!("invalid exponent {}", self.theta)));
        }
        Ok(())
    }
}

/// `ceil(k^theta)`, treating values within rounding error of an integer as
/// that integer (so `64^{1/2}` gives 8).
pub fn n_inner(k: f64, theta: f64) -> usize {
    let v = k.powf(theta);
    let r = v.round();
    let n = if (v - r).abs() <= 1e-9 * v.max(1.0) {
        r
    } else {
        v.ceil()
    };
    (n as usize).max(1)
}

/// Per-step contraction bound `(1 - 1/k) / (1 + 1/k)`.
pub fn contraction_bound(k: f64) -> f64 {
    cayley_factor(k)
}

/// Geometric-mean per-step contraction `(r_N / r_0)^{1/N}`.
pub fn rate(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(HelmError::RateUndefined("need at least two residuals".into()));
    }
    let r0 = residuals[0];
    if !(r0 > 0.0) {
        return Err(HelmError::RateUndefined("initial residual is zero".into()));
    }
    let n = (residuals.len() - 1) as f64;
    Ok((residuals[residuals.len() - 1] / r0).powf(1.0 / n))
}

/// Accumulates `ln(r_N / r_0)` over runs of `N` steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateAccumulator {
    pub log_sum: f64,
    pub steps: usize,
}

impl RateAccumulator {
    pub fn add(&mut self, r0: f64, rn: f64, steps: usize) {
        if r0 > 0.0 && rn > 0.0 && steps > 0 {
            self.log_sum += (rn / r0).ln();
            self.steps += steps;
        }
    }

    pub fn rate(&self) -> Option<f64> {
        (self.steps > 0).then(|| (self.log_sum / self.steps as f64).exp())
    }
}

fn shifted_residual(f: &dyn HssFormulation, x: &[C64], r: &[C64]) -> f64 {
    let mut ax = zeros(x.len());
    f.shifted_operator().apply(x, &mut ax);
    for (a, b) in ax.iter_mut().zip(r) {
        *a = b - *a;
    }
    norm2(&ax)
}

#[derive(Debug, Clone, Default)]
pub struct PreconditionerStats {
    pub applications: usize,
    pub inner_steps: usize,
    /// Preconditioned shifted-residual contraction over all inner steps.
    pub shifted: RateAccumulator,
    pub inner: InnerStats,
    /// Preconditioned shifted residual norms (step increments) of every
    /// application, when `record_steps` is set.
    pub step_residuals: Vec<Vec<f64>>,
    pub record_steps: bool,
}

impl PreconditionerStats {
    pub fn eta_s(&self) -> Option<f64> {
        self.shifted.rate()
    }
}

/// `n_inner` HSS steps from zero, used as a (fixed) preconditioner.
pub struct HssPreconditioner<'a> {
    pub formulation: &'a dyn HssFormulation,
    pub inner: &'a dyn InnerSolver,
    pub n_inner: usize,
    pub stats: PreconditionerStats,
}

impl<'a> HssPreconditioner<'a> {
    pub fn new(formulation: &'a dyn HssFormulation, inner: &'a dyn InnerSolver, n_inner: usize) -> Result<Self> {
        if n_inner == 0 {
            return Err(HelmError::InvalidConfig("at least one inner step is required".into()));
        }
        if inner.dim() != formulation.forms().num_cg1() {
            return Err(HelmError::DimensionMismatch {
                expected: formulation.forms().num_cg1(),
                found: inner.dim(),
            });
        }
        Ok(HssPreconditioner {
            formulation,
            inner,
            n_inner,
            stats: PreconditionerStats::default(),
        })
    }

    /// Approximates `A_shifted^{-1} r`.
    ///
    /// Each step is a preconditioned Richardson update
    /// `x_{n+1} = x_n + P^{-1}(r - A x_n)`, so the increment `x_{n+1} - x_n`
    /// is the preconditioned shifted residual of `x_n`; its contraction from
    /// the first to the last step feeds `eta_s`.
    pub fn apply_to(&mut self, r: &[C64]) -> Result<Vec<C64>> {
        let f = self.formulation;
        if r.len() != f.dim() {
            return Err(HelmError::DimensionMismatch {
                expected: f.dim(),
                found: r.len(),
            });
        }
        let mut x = zeros(r.len());
        let mut first = 0.0;
        let mut last = 0.0;
        let mut trail = Vec::new();
        for n in 0..self.n_inner {
            let next = f.step(&x, r, self.inner, &mut self.stats.inner)?;
            last = next.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if n == 0 {
                first = last;
            }
            x = next;
            if self.stats.record_steps {
                trail.push(last);
            }
        }
        self.stats.applications += 1;
        self.stats.inner_steps += self.n_inner;
        self.stats.shifted.add(first, last, self.n_inner - 1);
        if self.stats.record_steps {
            self.stats.step_residuals.push(trail);
        }
        Ok(x)
    }
}

impl Preconditioner for HssPreconditioner<'_> {
    fn apply(&mut self, r: &[C64], z: &mut [C64]) -> Result<()> {
        let x = self.apply_to(r)?;
        z.copy_from_slice(&x);
        Ok(())
    }
}

/// Result of running the HSS iteration as a standalone solver.
#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub solution: Vec<C64>,
    /// True shifted residual norms, starting with `||r||`.
    pub trace: IterationTrace,
    /// 2-norms of the step increments `x_{n+1} - x_n`.
    pub increments: Vec<f64>,
    /// The same increments in the formulation's `h_norm`, where they
    /// contract by at most `(k - 1) / (k + 1)` per step.
    pub h_increments: Vec<f64>,
}

/// Runs the HSS iteration as a solver for the shifted system `A x = r`
/// from zero until the residual drops below `tol ||r||`.
pub fn hss_stationary_solve(
    f: &dyn HssFormulation,
    inner: &dyn InnerSolver,
    r: &[C64],
    tol: f64,
    max_steps: usize,
) -> Result<StationaryRun> {
    let r0 = norm2(r);
    let mut run = StationaryRun {
        solution: zeros(r.len()),
        trace: IterationTrace {
            residuals: vec![r0],
            iterations: 0,
            converged: r0 == 0.0,
        },
        increments: Vec::new(),
        h_increments: Vec::new(),
    };
    if run.trace.converged {
        return Ok(run);
    }
    let mut stats = InnerStats::default();
    for it in 1..=max_steps {
        let next = f.step(&run.solution, r, inner, &mut stats)?;
        let d = sub(&next, &run.solution);
        run.increments.push(norm2(&d));
        run.h_increments.push(f.h_norm(&d));
        run.solution = next;
        let res = shifted_residual(f, &run.solution, r);
        run.trace.residuals.push(res);
        run.trace.iterations = it;
        if res <= tol * r0 {
            run.trace.converged = true;
            return Ok(run);
        }
    }
    Err(HelmError::IterationCap(max_steps))
}

/// Worst observed error reduction in the norm `h_norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionSample {
    /// Largest single-step ratio `||e_{n+1}||_H / ||e_n||_H`.
    pub max_step_ratio: f64,
    /// Largest reduction over `batched_steps` consecutive steps.
    pub max_batched_ratio: f64,
    pub batched_steps: usize,
}

/// Measures the error reduction of the HSS step on the shifted system.
///
/// Each trial draws a random exact solution `x*` (scaled by `solution_scale`),
/// sets `r = A_shifted x*` and starts from `x* + e`. Error scales are spread
/// from 1 down to 1e-3 so that a step whose fixed point is not `x*` shows up
/// as a large ratio. Inexact inner solves also move the fixed point, so
/// they are measured with `solution_scale = 0`, which isolates the error
/// propagator. The first `batched_trials` trials are also iterated for
/// `batched_steps` steps.
pub fn measure_contraction<R: rand::Rng + ?Sized>(
    f: &dyn HssFormulation,
    inner: &dyn InnerSolver,
    solution_scale: f64,
    trials: usize,
    batched_trials: usize,
    batched_steps: usize,
    rng: &mut R,
) -> Result<ContractionSample> {
    let mut out = ContractionSample {
        max_step_ratio: 0.0,
        max_batched_ratio: 0.0,
        batched_steps,
    };
    let mut stats = InnerStats::default();
    for t in 0..trials {
        let exact: Vec<C64> = random_vector(f.dim(), rng)
            .into_iter()
            .map(|v| v * solution_scale)
            .collect();
        let mut r = zeros(f.dim());
        f.shifted_operator().apply(&exact, &mut r);
        let scale = 10f64.powf(-3.0 * t as f64 / (trials.max(2) - 1) as f64);
        let e: Vec<C64> = random_vector(f.dim(), rng).into_iter().map(|v| v * scale).collect();
        let e0 = f.h_norm(&e);
        let mut x: Vec<C64> = exact.iter().zip(&e).map(|(a, b)| a + b).collect();
        let steps = if t < batched_trials { batched_steps.max(1) } else { 1 };
        let mut prev = e0;
        for _ in 0..steps {
            x = f.step(&x, &r, inner, &mut stats)?;
            let err = f.h_norm(&sub(&x, &exact));
            out.max_step_ratio = out.max_step_ratio.max(err / prev);
            prev = err;
        }
        if t < batched_trials {
            out.max_batched_ratio = out.max_batched_ratio.max(prev / e0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_counts() {
        assert_eq!(n_inner(16.0, 1.0), 16);
        assert_eq!(n_inner(16.0, 0.5), 4);
        assert_eq!(n_inner(64.0, 0.5), 8);
        assert_eq!(n_inner(32.0, 0.5), 6);
        assert_eq!(n_inner(16.0, 1.5), 64);
        assert_eq!(n_inner(32.0, 1.5), 182);
        assert_eq!(n_inner(64.0, 1.5), 512);
    }

    #[test]
    fn rate_examples() {
        assert!((rate(&[1.0, 0.1, 0.01]).unwrap() - 0.1).abs() < 1e-15);
        let c: f64 = 0.37;
        let r: Vec<f64> = (0..6).map(|i| c.powi(i)).collect();
        assert!((rate(&r).unwrap() - c).abs() < 1e-14);
        assert!(rate(&[1.0]).is_err());
        assert!(rate(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn accumulator_skips_zero_runs() {
        let mut a = RateAccumulator::default();
        a.add(0.0, 0.0, 4);
        assert_eq!(a.rate(), None);
        a.add(1.0, 0.25, 2);
        assert!((a.rate().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_values() {
        assert!((contraction_bound(16.0) - 15.0 / 17.0).abs() < 1e-15);
        assert!((contraction_bound(32.0) - 31.0 / 33.0).abs() < 1e-15);
    }
}
