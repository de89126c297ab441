//! Shifted-HSS preconditioned finite-element solvers for the 2-D indefinite
//! Helmholtz equation `-k^2 u - lap u = f` on the unit square with impedance
//! boundary conditions.

pub mod assembly;
pub mod driver;
pub mod error;
pub mod hss;
pub mod krylov;
pub mod linalgc;
pub mod mesh;
pub mod multigrid;
pub mod registry;

pub use error::{HelmError, Result};
