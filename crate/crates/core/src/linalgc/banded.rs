//! Banded LU factorization without pivoting.

use num_complex::Complex64 as C64;

use super::csr::ComplexSparseMatrix;
use crate::error::{HelmError, Result};

/// Relative pivot threshold: a pivot smaller than this times the largest
/// magnitude in its original row aborts the factorization.
pub const PIVOT_TOL: f64 = 1e-14;

/// In-place LU factors stored row-wise in a band of width `lower + upper + 1`.
///
/// Entry `(i, j)` with `i - lower <= j <= i + upper` lives at
/// `band[i * width + (j + lower - i)]`. The unit lower factor overwrites the
/// strictly lower part.
#[derive(Debug, Clone)]
pub struct BandedLU {
    n: usize,
    lower: usize,
    upper: usize,
    band: Vec<C64>,
}

impl BandedLU {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Bytes of band storage a factorization of `a` would need.
    pub fn storage_bytes(a: &ComplexSparseMatrix) -> usize {
        let (l, u) = a.bandwidths();
        a.rows() * (l + u + 1) * std::mem::size_of::<C64>()
    }

    #[inline]
    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    pub fn factor(a: &ComplexSparseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(HelmError::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![C64::new(0.0, 0.0); n * width];
        let mut row_scale = vec![0.0f64; n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                band[i * width + (j + lower - i)] = v;
                row_scale[i] = row_scale[i].max(v.norm());
            }
        }

        for k in 0..n {
            let pivot = band[k * width + lower];
            if pivot.norm() < PIVOT_TOL * row_scale[k] || pivot.norm() == 0.0 {
                return Err(HelmError::SmallPivot {
                    index: k,
                    magnitude: pivot.norm(),
                });
            }
            let inv = 1.0 / pivot;
            let jmax = (k + upper).min(n - 1);
            let imax = (k + lower).min(n - 1);
            let (head, tail) = band.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width + lower + 1..k * width + lower + 1 + (jmax - k)];
            for i in k + 1..=imax {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let off = k + lower - i;
                let l = row[off] * inv;
                row[off] = l;
                if l.norm_sqr() == 0.0 {
                    continue;
                }
                // columns k+1..=jmax of row i start at offset off + 1
                for (dst, &u) in row[off + 1..off + 1 + (jmax - k)].iter_mut().zip(pivot_row) {
                    *dst -= l * u;
                }
            }
        }
        Ok(BandedLU { n, lower, upper, band })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n, "banded solve: rhs length");
        let (n, lower, width) = (self.n, self.lower, self.width());
        for i in 0..n {
            let j0 = i.saturating_sub(lower);
            let row = &self.band[i * width..];
            let mut acc = b[i];
            for j in j0..i {
                acc -= row[j + lower - i] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let jmax = (i + self.upper).min(n - 1);
            let row = &self.band[i * width..];
            let mut acc = b[i];
            for j in i + 1..=jmax {
                acc -= row[j + lower - i] * b[j];
            }
            b[i] = acc / row[lower];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Dense `L U` product, for reconstruction checks on small systems.
    pub fn reconstruct_dense(&self) -> Vec<Vec<C64>> {
        let n = self.n;
        let w = self.width();
        let entry = |i: usize, j: usize| -> C64 {
            if j + self.lower < i || j > i + self.upper {
                C64::new(0.0, 0.0)
            } else {
                self.band[i * w + (j + self.lower - i)]
            }
        };
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, dst) in row.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for p in 0..=i.min(j) {
                    let l = if p == i { C64::new(1.0, 0.0) } else { entry(i, p) };
                    s += l * entry(p, j);
                }
                *dst = s;
            }
        }
        out
    }
}

pub fn banded_lu_factor(a: &ComplexSparseMatrix) -> Result<BandedLU> {
    BandedLU::factor(a)
}

pub fn banded_lu_solve(f: &BandedLU, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != f.dim() {
        return Err(HelmError::DimensionMismatch {
            expected: f.dim(),
            found: b.len(),
        });
    }
    Ok(f.solve(b))
}
