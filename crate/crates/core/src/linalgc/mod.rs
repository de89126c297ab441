//! Complex sparse linear algebra.

pub mod banded;
pub mod csr;
pub mod dense;
pub mod direct;
pub mod jacobi;
pub mod ldlt;
pub mod vector;

pub use banded::{banded_lu_factor, banded_lu_solve, BandedLU};
pub use csr::{ComplexSparseMatrix, CsrMatrix, RealSparseMatrix};
pub use dense::dense_lu_solve;
pub use direct::{factorization_registry, DirectFactorization, FactorRequest};
pub use jacobi::{jacobi_apply, Jacobi};
pub use ldlt::{nested_dissection_lattice, SparseLdlt};
