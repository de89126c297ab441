//! Compressed sparse row storage.

use std::io::Write;
use std::ops::{AddAssign, Mul};
use std::path::Path;

use num_complex::Complex64 as C64;
use num_traits::Zero;

use crate::error::{HelmError, Result};

/// CSR matrix. Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

pub type ComplexSparseMatrix = CsrMatrix<C64>;
pub type RealSparseMatrix = CsrMatrix<f64>;

impl<T> CsrMatrix<T>
where
    T: Copy + Zero + AddAssign,
{
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn from_raw(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(HelmError::InvalidConfig(format!("malformed CSR: {msg}")));
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return bad("row pointer length");
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return bad("entry count");
        }
        for i in 0..rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return bad("row pointers decrease");
            }
            let cols_i = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols_i.windows(2).any(|w| w[0] >= w[1]) || cols_i.iter().any(|&j| j >= cols) {
                return bad("column indices");
            }
        }
        Ok(CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        CsrMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn same_pattern<U>(&self, other: &CsrMatrix<U>) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Unconjugated transpose.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                col_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Largest `|i - j|` over stored entries, split into lower and upper parts.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.rows {
            for &j in self.row(i).0 {
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
        (lower, upper)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.cols]; self.rows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `y = A x`, traversing rows and entries in storage order.
    pub fn spmv_into<V>(&self, x: &[V], y: &mut [V])
    where
        V: Copy + Zero + AddAssign + Mul<T, Output = V>,
    {
        assert_eq!(x.len(), self.cols, "spmv: input length");
        assert_eq!(y.len(), self.rows, "spmv: output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = V::zero();
            for (&j, &a) in cols.iter().zip(vals) {
                acc += x[j] * a;
            }
            *yi = acc;
        }
    }

    /// Checked `A x`.
    pub fn spmv<V>(&self, x: &[V]) -> Result<Vec<V>>
    where
        V: Copy + Zero + AddAssign + Mul<T, Output = V>,
    {
        if x.len() != self.cols {
            return Err(HelmError::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut y = vec![V::zero(); self.rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }
}

impl RealSparseMatrix {
    /// `sum_t c_t A_t` over matrices sharing one sparsity pattern.
    pub fn combine(terms: &[(C64, &RealSparseMatrix)]) -> ComplexSparseMatrix {
        let (_, first) = terms[0];
        assert!(
            terms.iter().all(|(_, m)| m.same_pattern(first)),
            "combine: matrices must share a sparsity pattern"
        );
        let mut values = vec![C64::zero(); first.nnz()];
        for &(c, m) in terms {
            for (v, &a) in values.iter_mut().zip(&m.values) {
                *v += c * a;
            }
        }
        CsrMatrix {
            rows: first.rows,
            cols: first.cols,
            row_ptr: first.row_ptr.clone(),
            col_idx: first.col_idx.clone(),
            values,
        }
    }

    pub fn to_complex(&self) -> ComplexSparseMatrix {
        self.map(|v| C64::new(v, 0.0))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl ComplexSparseMatrix {
    /// Writes the matrix in MatrixMarket coordinate format, one
    /// `row col re im` entry per line (1-based indices).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
