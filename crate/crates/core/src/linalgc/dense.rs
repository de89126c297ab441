//! Dense LU with partial pivoting, used as a reference solver.

use num_complex::Complex64 as C64;

use crate::error::{HelmError, Result};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_lu_solve(a: &[Vec<C64>], b: &[C64]) -> Result<Vec<C64>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(HelmError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut m: Vec<Vec<C64>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap_or(k);
        if m[p][k].norm() == 0.0 {
            return Err(HelmError::SmallPivot {
                index: k,
                magnitude: 0.0,
            });
        }
        m.swap(k, p);
        x.swap(k, p);
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for (off, row) in rest.iter_mut().enumerate() {
            let l = row[k] / pivot_row[k];
            if l.norm_sqr() == 0.0 {
                continue;
            }
            for j in k..n {
                row[j] -= l * pivot_row[j];
            }
            let xk = x[k];
            x[k + 1 + off] -= l * xk;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_pivoting() {
        let c = |v: f64| C64::new(v, 0.0);
        let a = vec![vec![c(0.0), c(1.0)], vec![c(2.0), c(1.0)]];
        let x = dense_lu_solve(&a, &[c(1.0), c(3.0)]).unwrap();
        assert!((x[0] - c(1.0)).norm() < 1e-15 && (x[1] - c(1.0)).norm() < 1e-15);
    }
}
