use num_complex::Complex64 as C64;

use super::csr::ComplexSparseMatrix;
use crate::error::{HelmError, Result};

/// Point Jacobi preconditioner `z_i = r_i / A_ii`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<C64>,
}

impl Jacobi {
    pub fn new(a: &ComplexSparseMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d.norm_sqr() == 0.0 {
                    Err(HelmError::ZeroDiagonal(i))
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Jacobi { inv_diag })
    }

    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    pub fn apply_into(&self, r: &[C64], z: &mut [C64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }

    pub fn apply(&self, r: &[C64]) -> Vec<C64> {
        let mut z = vec![C64::new(0.0, 0.0); r.len()];
        self.apply_into(r, &mut z);
        z
    }
}

/// Convenience wrapper matching the operation name.
pub fn jacobi_apply(a: &ComplexSparseMatrix, r: &[C64]) -> Result<Vec<C64>> {
    if r.len() != a.rows() {
        return Err(HelmError::DimensionMismatch {
            expected: a.rows(),
            found: r.len(),
        });
    }
    Ok(Jacobi::new(a)?.apply(r))
}
