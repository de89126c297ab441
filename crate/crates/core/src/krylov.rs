//! GMRES variants: flexible right-preconditioned (outer solver), plain
//! right-preconditioned, and fixed-step left-preconditioned (smoother).
//!
//! Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass.
//! There is no restarting.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::assembly::MixedOperator;
use crate::error::{HelmError, Result};
use crate::linalgc::vector::{axpy, dot, norm2, zeros};
use crate::linalgc::ComplexSparseMatrix;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for ComplexSparseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.spmv_into(x, y)
    }
}

impl LinearOperator for MixedOperator<'_> {
    fn dim(&self) -> usize {
        MixedOperator::dim(self)
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_into(x, y)
    }
}

/// A (possibly varying, possibly stateful) preconditioner `z = P(r)`.
pub trait Preconditioner {
    fn apply(&mut self, r: &[C64], z: &mut [C64]) -> Result<()>;
}

impl<F> Preconditioner for F
where
    F: FnMut(&[C64], &mut [C64]) -> Result<()>,
{
    fn apply(&mut self, r: &[C64], z: &mut [C64]) -> Result<()> {
        self(r, z)
    }
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[C64], z: &mut [C64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMode {
    ConvergeToRtol,
    FixedIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Relative to the initial residual `||b - A x0||`.
    pub rtol: f64,
    pub maxiter: usize,
    /// An initial residual at or below this stops before the first iteration.
    pub atol: f64,
    pub mode: KrylovMode,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            rtol: 1e-6,
            maxiter: 200,
            atol: 0.0,
            mode: KrylovMode::ConvergeToRtol,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(HelmError::InvalidConfig(format!("rtol {} not in (0, 1)", self.rtol)));
        }
        if self.maxiter == 0 {
            return Err(HelmError::InvalidConfig("maxiter must be at least 1".into()));
        }
        Ok(())
    }
}

/// True residual 2-norms, `residuals[0]` being the initial one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IterationTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "iter,residual")?;
        for (i, r) in self.residuals.iter().enumerate() {
            writeln!(w, "{i},{r:.17e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Givens {
    c: f64,
    s: C64,
}

impl Givens {
    /// Rotation zeroing `b` in `(a, b)`.
    fn new(a: C64, b: C64) -> Self {
        let (na, nb) = (a.norm(), b.norm());
        if nb == 0.0 {
            return Givens {
                c: 1.0,
                s: C64::new(0.0, 0.0),
            };
        }
        if na == 0.0 {
            return Givens {
                c: 0.0,
                s: b.conj() / nb,
            };
        }
        let t = na.hypot(nb);
        Givens {
            c: na / t,
            s: (a / na) * b.conj() / t,
        }
    }

    #[inline]
    fn apply(&self, x: &mut C64, y: &mut C64) {
        let (a, b) = (*x, *y);
        *x = self.c * a + self.s * b;
        *y = -self.s.conj() * a + self.c * b;
    }
}

/// Arnoldi state shared by the GMRES variants.
struct Arnoldi {
    basis: Vec<Vec<C64>>,
    /// Column `j` of the rotated Hessenberg matrix (length `j + 2`).
    cols: Vec<Vec<C64>>,
    rotations: Vec<Givens>,
    g: Vec<C64>,
}

enum Step {
    Continue,
    /// The Krylov space became invariant.
    Breakdown,
}

impl Arnoldi {
    fn new(r0: Vec<C64>, beta: f64) -> Self {
        let mut v0 = r0;
        let inv = 1.0 / beta;
        v0.iter_mut().for_each(|v| *v *= inv);
        Arnoldi {
            basis: vec![v0],
            cols: Vec::new(),
            rotations: Vec::new(),
            g: vec![C64::new(beta, 0.0)],
        }
    }

    /// Orthogonalizes `w` against the basis, extends the factorization and
    /// returns the estimated residual norm.
    fn extend(&mut self, mut w: Vec<C64>) -> (Step, f64) {
        let j = self.basis.len() - 1;
        let w_norm0 = norm2(&w);
        let mut h = vec![C64::new(0.0, 0.0); j + 2];
        for _pass in 0..2 {
            for (i, v) in self.basis.iter().enumerate() {
                let hij = dot(v, &w);
                axpy(-hij, v, &mut w);
                h[i] += hij;
            }
        }
        let hn = norm2(&w);
        h[j + 1] = C64::new(hn, 0.0);
        for (i, rot) in self.rotations.iter().enumerate() {
            let (a, b) = h.split_at_mut(i + 1);
            rot.apply(&mut a[i], &mut b[0]);
        }
        let rot = Givens::new(h[j], h[j + 1]);
        {
            let (a, b) = h.split_at_mut(j + 1);
            rot.apply(&mut a[j], &mut b[0]);
        }
        self.rotations.push(rot);
        self.g.push(C64::new(0.0, 0.0));
        {
            let (a, b) = self.g.split_at_mut(j + 1);
            rot.apply(&mut a[j], &mut b[0]);
        }
        self.cols.push(h);
        let est = self.g[j + 1].norm();
        if hn <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE) || hn == 0.0 {
            return (Step::Breakdown, est);
        }
        let inv = 1.0 / hn;
        w.iter_mut().for_each(|v| *v *= inv);
        self.basis.push(w);
        (Step::Continue, est)
    }

    /// Least-squares coefficients for the first `m` basis directions.
    fn coefficients(&self, m: usize) -> Vec<C64> {
        let mut y = self.g[..m].to_vec();
        for i in (0..m).rev() {
            let mut acc = y[i];
            for jj in i + 1..m {
                acc -= self.cols[jj][i] * y[jj];
            }
            let d = self.cols[i][i];
            y[i] = if d.norm() == 0.0 { C64::new(0.0, 0.0) } else { acc / d };
        }
        y
    }
}

fn residual(a: &dyn LinearOperator, b: &[C64], x: &[C64]) -> Vec<C64> {
    let mut r = zeros(b.len());
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

fn check_dims(a: &dyn LinearOperator, b: &[C64], x0: &[C64]) -> Result<()> {
    for len in [b.len(), x0.len()] {
        if len != a.dim() {
            return Err(HelmError::DimensionMismatch {
                expected: a.dim(),
                found: len,
            });
        }
    }
    Ok(())
}

/// Flexible GMRES with right preconditioning. The preconditioned directions
/// are stored, so `precond` may change from one iteration to the next.
/// Convergence is tested on the true residual relative to `||b - A x0||`.
pub fn fgmres(
    a: &dyn LinearOperator,
    b: &[C64],
    x0: &[C64],
    config: &KrylovConfig,
    precond: &mut dyn Preconditioner,
) -> Result<(Vec<C64>, IterationTrace)> {
    config.validate()?;
    check_dims(a, b, x0)?;
    let n = b.len();
    let r0 = residual(a, b, x0);
    let beta = norm2(&r0);
    let mut trace = IterationTrace {
        residuals: vec![beta],
        iterations: 0,
        converged: false,
    };
    if beta <= config.atol {
        trace.converged = true;
        return Ok((x0.to_vec(), trace));
    }
    let target = config.rtol * beta;
    let mut arnoldi = Arnoldi::new(r0, beta);
    let mut zs: Vec<Vec<C64>> = Vec::new();
    let mut best = (beta, x0.to_vec());
    let mut w = zeros(n);

    for j in 0..config.maxiter {
        let mut z = zeros(n);
        precond.apply(&arnoldi.basis[j], &mut z)?;
        a.apply(&z, &mut w);
        zs.push(z);
        let (step, _est) = arnoldi.extend(std::mem::replace(&mut w, zeros(n)));

        let y = arnoldi.coefficients(j + 1);
        let mut x = x0.to_vec();
        for (yi, zi) in y.iter().zip(&zs) {
            axpy(*yi, zi, &mut x);
        }
        let rn = norm2(&residual(a, b, &x));
        trace.residuals.push(rn);
        trace.iterations = j + 1;
        if rn < best.0 {
            best = (rn, x.clone());
        }
        let done = config.mode == KrylovMode::ConvergeToRtol && rn <= target;
        if done || matches!(step, Step::Breakdown) {
            trace.converged = rn <= target || matches!(step, Step::Breakdown);
            return Ok((x, trace));
        }
    }
    trace.converged = config.mode == KrylovMode::FixedIterations || best.0 <= target;
    Ok((best.1, trace))
}

/// Right-preconditioned GMRES with a fixed preconditioner: only the Arnoldi
/// basis is stored and `x = x0 + P(V y)`.
pub fn gmres_right(
    a: &dyn LinearOperator,
    b: &[C64],
    x0: &[C64],
    config: &KrylovConfig,
    precond: &mut dyn Preconditioner,
) -> Result<(Vec<C64>, IterationTrace)> {
    config.validate()?;
    check_dims(a, b, x0)?;
    let n = b.len();
    let r0 = residual(a, b, x0);
    let beta = norm2(&r0);
    let mut trace = IterationTrace {
        residuals: vec![beta],
        iterations: 0,
        converged: false,
    };
    if beta <= config.atol {
        trace.converged = true;
        return Ok((x0.to_vec(), trace));
    }
    let target = config.rtol * beta;
    let mut arnoldi = Arnoldi::new(r0, beta);
    let mut x = x0.to_vec();
    let mut z = zeros(n);
    let mut w = zeros(n);
    for j in 0..config.maxiter {
        precond.apply(&arnoldi.basis[j], &mut z)?;
        a.apply(&z, &mut w);
        let (step, _) = arnoldi.extend(std::mem::replace(&mut w, zeros(n)));
        let y = arnoldi.coefficients(j + 1);
        let mut vy = zeros(n);
        for (yi, vi) in y.iter().zip(&arnoldi.basis) {
            axpy(*yi, vi, &mut vy);
        }
        precond.apply(&vy, &mut z)?;
        x = x0.to_vec();
        axpy(C64::new(1.0, 0.0), &z, &mut x);
        let rn = norm2(&residual(a, b, &x));
        trace.residuals.push(rn);
        trace.iterations = j + 1;
        if (config.mode == KrylovMode::ConvergeToRtol && rn <= target) || matches!(step, Step::Breakdown) {
            trace.converged = true;
            return Ok((x, trace));
        }
    }
    trace.converged = trace.residuals.last().copied().unwrap_or(beta) <= target;
    Ok((x, trace))
}

/// Exactly `iters` steps of left-preconditioned GMRES from `x0`, with no
/// tolerance test. Stops early only if the residual is already zero or the
/// Krylov space becomes invariant.
pub fn gmres_fixed<P>(a: &dyn LinearOperator, b: &[C64], x0: &[C64], iters: usize, precond: P) -> Vec<C64>
where
    P: Fn(&[C64], &mut [C64]),
{
    let n = b.len();
    let r = residual(a, b, x0);
    let mut pr = zeros(n);
    precond(&r, &mut pr);
    let beta = norm2(&pr);
    if beta == 0.0 || iters == 0 {
        return x0.to_vec();
    }
    let mut arnoldi = Arnoldi::new(pr, beta);
    let mut w = zeros(n);
    let mut steps = 0;
    for j in 0..iters {
        a.apply(&arnoldi.basis[j], &mut w);
        let mut pw = zeros(n);
        precond(&w, &mut pw);
        let (step, _) = arnoldi.extend(pw);
        steps = j + 1;
        if matches!(step, Step::Breakdown) {
            break;
        }
    }
    let y = arnoldi.coefficients(steps);
    let mut x = x0.to_vec();
    for (yi, vi) in y.iter().zip(&arnoldi.basis) {
        axpy(*yi, vi, &mut x);
    }
    x
}
