//! Exact solvers for the shifted systems, selectable by name.

use num_complex::Complex64 as C64;

use super::banded::BandedLU;
use super::csr::ComplexSparseMatrix;
use super::ldlt::{nested_dissection_lattice, SparseLdlt};
use crate::error::Result;
use crate::registry::Registry;

/// A factored matrix that can solve in place.
pub trait DirectFactorization: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn solve_in_place(&self, b: &mut [C64]);

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl DirectFactorization for BandedLU {
    fn name(&self) -> &'static str {
        "banded-lu"
    }
    fn dim(&self) -> usize {
        BandedLU::dim(self)
    }
    fn solve_in_place(&self, b: &mut [C64]) {
        BandedLU::solve_in_place(self, b)
    }
}

impl DirectFactorization for SparseLdlt {
    fn name(&self) -> &'static str {
        "nd-ldlt"
    }
    fn dim(&self) -> usize {
        SparseLdlt::dim(self)
    }
    fn solve_in_place(&self, b: &mut [C64]) {
        SparseLdlt::solve_in_place(self, b)
    }
}

/// Input to a factorization backend. `lattice` is the number of cells per
/// direction when rows are lexicographic lattice vertices.
pub struct FactorRequest<'a> {
    pub matrix: &'a ComplexSparseMatrix,
    pub lattice: Option<usize>,
}

pub type FactorFn = fn(&FactorRequest<'_>) -> Result<Box<dyn DirectFactorization>>;

/// Band storage above this size makes `auto` switch to nested dissection
/// (when the rows are lattice vertices).
pub const AUTO_BAND_LIMIT_BYTES: usize = 32 << 20;

fn banded(req: &FactorRequest<'_>) -> Result<Box<dyn DirectFactorization>> {
    Ok(Box::new(BandedLU::factor(req.matrix)?))
}

fn nd_ldlt(req: &FactorRequest<'_>) -> Result<Box<dyn DirectFactorization>> {
    let n = req.matrix.rows();
    let perm = match req.lattice {
        Some(cells) if (cells + 1) * (cells + 1) == n => nested_dissection_lattice(cells),
        _ => (0..n).collect(),
    };
    Ok(Box::new(SparseLdlt::factor(req.matrix, perm)?))
}

fn auto(req: &FactorRequest<'_>) -> Result<Box<dyn DirectFactorization>> {
    if req.lattice.is_none() || BandedLU::storage_bytes(req.matrix) <= AUTO_BAND_LIMIT_BYTES {
        banded(req)
    } else {
        nd_ldlt(req)
    }
}

/// Built-in backends: `auto`, `banded-lu`, `nd-ldlt`.
pub fn factorization_registry() -> Registry<FactorFn> {
    let mut r: Registry<FactorFn> = Registry::new("direct factorization");
    r.register("auto", auto)
        .register("banded-lu", banded)
        .register("nd-ldlt", nd_ldlt);
    r
}
