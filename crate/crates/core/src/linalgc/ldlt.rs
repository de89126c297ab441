//! Sparse `L D L^T` factorization for complex symmetric matrices.
//!
//! Up-looking (row-by-row) factorization after a symmetric permutation; no
//! pivoting. For the shifted Helmholtz operators used here the imaginary part
//! is negative definite, so every leading block of any symmetric permutation
//! is nonsingular. Lattice problems get a geometric nested-dissection
//! ordering, which keeps the fill at `O(N log N)` instead of the `O(N^{3/2})`
//! band.

use num_complex::Complex64 as C64;

use super::banded::PIVOT_TOL;
use super::csr::ComplexSparseMatrix;
use crate::error::{HelmError, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseLdlt {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    lx: Vec<C64>,
    d: Vec<C64>,
}

/// Nested-dissection ordering of the `(n+1) x (n+1)` vertex lattice,
/// numbered lexicographically by `(iy, ix)`. Separators are full lattice
/// lines, which split any stencil whose couplings span at most one lattice
/// step per direction.
pub fn nested_dissection_lattice(n: usize) -> Vec<usize> {
    let m = n + 1;
    let mut out = Vec::with_capacity(m * m);
    dissect(0, m, 0, m, m, &mut out);
    out
}

fn dissect(x0: usize, x1: usize, y0: usize, y1: usize, m: usize, out: &mut Vec<usize>) {
    let (w, h) = (x1 - x0, y1 - y0);
    if w == 0 || h == 0 {
        return;
    }
    if w * h <= 8 {
        for y in y0..y1 {
            for x in x0..x1 {
                out.push(y * m + x);
            }
        }
        return;
    }
    if w >= h {
        let s = x0 + w / 2;
        dissect(x0, s, y0, y1, m, out);
        dissect(s + 1, x1, y0, y1, m, out);
        for y in y0..y1 {
            out.push(y * m + s);
        }
    } else {
        let s = y0 + h / 2;
        dissect(x0, x1, y0, s, m, out);
        dissect(x0, x1, s + 1, y1, m, out);
        for x in x0..x1 {
            out.push(s * m + x);
        }
    }
}

impl SparseLdlt {
    /// Factors `P A P^T = L D L^T` with `perm[new] = old`. `a` must be
    /// structurally symmetric and complex symmetric; only entries on or above
    /// the permuted diagonal are read.
    pub fn factor(a: &ComplexSparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(HelmError::DimensionMismatch {
                expected: n,
                found: a.cols(),
            });
        }
        if perm.len() != n {
            return Err(HelmError::DimensionMismatch {
                expected: n,
                found: perm.len(),
            });
        }
        let mut pinv = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || pinv[old] != NONE {
                return Err(HelmError::InvalidConfig("ordering is not a permutation".into()));
            }
            pinv[old] = new;
        }

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &j in a.row(perm[k]).0 {
                let mut i = pinv[j];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + lnz[k];
        }
        let total = col_ptr[n];
        if total > u32::MAX as usize {
            return Err(HelmError::InvalidConfig("factor too large".into()));
        }

        // Numeric, row by row.
        let mut row_idx = vec![0u32; total];
        let mut lx = vec![C64::new(0.0, 0.0); total];
        let mut d = vec![C64::new(0.0, 0.0); n];
        let mut y = vec![C64::new(0.0, 0.0); n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|c| *c = 0);
        flag.iter_mut().for_each(|f| *f = NONE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(perm[k]);
            let mut scale = 0.0f64;
            for (&j, &v) in cols.iter().zip(vals) {
                scale = scale.max(v.norm());
                let mut i = pinv[j];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            let mut dk = y[k];
            y[k] = C64::new(0.0, 0.0);
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = C64::new(0.0, 0.0);
                let p0 = col_ptr[i];
                let p2 = p0 + lnz[i];
                for p in p0..p2 {
                    y[row_idx[p] as usize] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                row_idx[p2] = k as u32;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if dk.norm() < PIVOT_TOL * scale || dk.norm() == 0.0 {
                return Err(HelmError::SmallPivot {
                    index: perm[k],
                    magnitude: dk.norm(),
                });
            }
            d[k] = dk;
        }

        Ok(SparseLdlt {
            n,
            perm,
            col_ptr,
            row_idx,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored off-diagonal entries of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n, "ldlt solve: rhs length");
        let mut x: Vec<C64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            if xj.norm_sqr() == 0.0 {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                x[self.row_idx[p] as usize] -= self.lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= self.lx[p] * x[self.row_idx[p] as usize];
            }
            x[j] = acc;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalgc::csr::CsrMatrix;

    #[test]
    fn lattice_ordering_is_a_permutation() {
        for n in [1, 2, 5, 16, 31] {
            let mut p = nested_dissection_lattice(n);
            assert_eq!(p.len(), (n + 1) * (n + 1));
            p.sort_unstable();
            assert!(p.iter().enumerate().all(|(i, &v)| i == v));
        }
    }

    #[test]
    fn complex_symmetric_tridiagonal() {
        let n = 9;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.0, -3.0)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(-1.0, 0.2)));
                t.push((i + 1, i, C64::new(-1.0, 0.2)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let perm: Vec<usize> = (0..n).rev().collect();
        let f = SparseLdlt::factor(&a, perm).unwrap();
        let x: Vec<C64> = (0..n).map(|i| C64::new(1.0 + i as f64, -(i as f64) * 0.5)).collect();
        let mut b = a.spmv(&x).unwrap();
        f.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn bad_permutation_rejected() {
        let a = ComplexSparseMatrix::identity(3);
        assert!(SparseLdlt::factor(&a, vec![0, 0, 1]).is_err());
    }
}
