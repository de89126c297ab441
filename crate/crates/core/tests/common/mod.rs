//! Independent reference computations for the integration tests: dense
//! elimination, dense products and quadrature-based assembly.

#![allow(dead_code)]

use helmhss::mesh::Mesh;
use num_complex::Complex64 as C64;

pub type Dense = Vec<Vec<C64>>;

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn dense_solve(a: &Dense, b: &[C64]) -> Vec<C64> {
    let n = b.len();
    let mut m: Dense = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].norm().partial_cmp(&m[j][col].norm()).unwrap())
            .unwrap();
        assert!(m[p][col].norm() > 0.0, "singular oracle system");
        m.swap(col, p);
        x.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
            let v = x[col];
            x[r] -= f * v;
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    x
}

pub fn dense_matvec(a: &Dense, x: &[C64]) -> Vec<C64> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(C64::new(0.0, 0.0), |acc, (v, xi)| acc + v * xi))
        .collect()
}

pub fn real_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(v, xi)| v * xi).sum())
        .collect()
}

pub fn rel_err(x: &[C64], y: &[C64]) -> f64 {
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let n: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

/// Coefficients `(a, b, c)` of the linear function `a + b x + c y` equal to
/// 1 at vertex `i` and 0 at the other two, by a 3x3 solve.
pub fn linear_basis(p: [[f64; 2]; 3], i: usize) -> [f64; 3] {
    let a: Dense = p
        .iter()
        .map(|v| vec![C64::new(1.0, 0.0), C64::new(v[0], 0.0), C64::new(v[1], 0.0)])
        .collect();
    let mut rhs = vec![C64::new(0.0, 0.0); 3];
    rhs[i] = C64::new(1.0, 0.0);
    let c = dense_solve(&a, &rhs);
    [c[0].re, c[1].re, c[2].re]
}

fn eval(c: [f64; 3], x: [f64; 2]) -> f64 {
    c[0] + c[1] * x[0] + c[2] * x[1]
}

/// Local mass and stiffness by the edge-midpoint rule (exact for quadratics).
pub fn quadrature_element(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    let basis: Vec<[f64; 3]> = (0..3).map(|i| linear_basis(p, i)).collect();
    let mids: Vec<[f64; 2]> = (0..3)
        .map(|e| {
            let (a, b) = (p[e], p[(e + 1) % 3]);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        })
        .collect();
    let mut mass = [[0.0; 3]; 3];
    let mut stiff = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mass[i][j] = mids.iter().map(|&x| eval(basis[i], x) * eval(basis[j], x)).sum::<f64>() * area / 3.0;
            stiff[i][j] = area * (basis[i][1] * basis[j][1] + basis[i][2] * basis[j][2]);
        }
    }
    (mass, stiff)
}

/// Dense global mass, stiffness and boundary mass of `mesh` by quadrature.
pub fn quadrature_forms(mesh: &Mesh) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let nv = mesh.num_vertices();
    let mut m = vec![vec![0.0; nv]; nv];
    let mut k = vec![vec![0.0; nv]; nv];
    let mut b = vec![vec![0.0; nv]; nv];
    for cell in &mesh.cells {
        let p = cell.map(|v| mesh.vertices[v]);
        let (lm, lk) = quadrature_element(p);
        for i in 0..3 {
            for j in 0..3 {
                m[cell[i]][cell[j]] += lm[i][j];
                k[cell[i]][cell[j]] += lk[i][j];
            }
        }
    }
    // Two-point Gauss rule on each boundary edge.
    let g = 0.5 / 3f64.sqrt();
    for e in &mesh.boundary_edges {
        for t in [0.5 - g, 0.5 + g] {
            let w = [1.0 - t, t];
            for i in 0..2 {
                for j in 0..2 {
                    b[e.vertices[i]][e.vertices[j]] += 0.5 * e.length * w[i] * w[j];
                }
            }
        }
    }
    (m, k, b)
}

pub fn seeded_vector(n: usize, seed: u64) -> Vec<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn seeded_matrix(n: usize, seed: u64, diag_shift: f64) -> Dense {
    let mut a: Dense = (0..n).map(|i| seeded_vector(n, seed * 1000 + i as u64)).collect();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += diag_shift;
    }
    a
}
