//! P1 / DG0 finite element assembly of the Helmholtz forms.
//!
//! All element integrals are real; complex coefficients enter only through
//! scalar prefactors when the real matrices are combined. Matrices act on
//! trial coefficients, so conjugation of test functions never reaches the
//! matrix entries.

use num_complex::Complex64 as C64;

use crate::linalgc::{ComplexSparseMatrix, CsrMatrix, RealSparseMatrix};
use crate::mesh::{DofMap, Mesh};

/// Local matrices of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrices {
    pub area: f64,
    pub mass: [[f64; 3]; 3],
    pub stiffness: [[f64; 3]; 3],
    /// `coupling[d][j] = area * d(phi_j)/dx_d`
    pub coupling: [[f64; 3]; 2],
}

impl ElementMatrices {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let grads = Self::gradients_with_area(p, area);
        let mut mass = [[area / 12.0; 3]; 3];
        let mut stiffness = [[0.0; 3]; 3];
        for i in 0..3 {
            mass[i][i] = area / 6.0;
            for j in 0..3 {
                stiffness[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
        let mut coupling = [[0.0; 3]; 2];
        for (d, row) in coupling.iter_mut().enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                *g = area * grads[j][d];
            }
        }
        ElementMatrices {
            area,
            mass,
            stiffness,
            coupling,
        }
    }

    fn gradients_with_area(p: [[f64; 2]; 3], area: f64) -> [[f64; 2]; 3] {
        let inv = 1.0 / (2.0 * area);
        let mut g = [[0.0; 2]; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            *gi = [(p[j][1] - p[k][1]) * inv, (p[k][0] - p[j][0]) * inv];
        }
        g
    }

    /// Constant gradients of the three barycentric basis functions.
    pub fn gradients(p: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        Self::gradients_with_area(p, area)
    }
}

/// Mass matrix of a boundary edge of length `len`.
pub fn edge_mass(len: f64) -> [[f64; 2]; 2] {
    [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]]
}

fn cell_points(mesh: &Mesh, cell: usize) -> [[f64; 2]; 3] {
    mesh.cells[cell].map(|v| mesh.vertices[v])
}

/// The real matrices every operator is built from.
///
/// `mass`, `stiffness` and `boundary_mass` share one CG1 sparsity pattern,
/// so complex linear combinations are entrywise.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub n: usize,
    pub mass: RealSparseMatrix,
    pub stiffness: RealSparseMatrix,
    pub boundary_mass: RealSparseMatrix,
    /// Diagonal DG0^2 mass: the cell area, once per component.
    pub sigma_mass: Vec<f64>,
    /// `<tau, grad u>`, DG0^2 rows by CG1 columns.
    pub gradient: RealSparseMatrix,
    pub gradient_t: RealSparseMatrix,
}

impl AssembledForms {
    pub fn num_cg1(&self) -> usize {
        self.mass.rows()
    }

    pub fn num_dg0(&self) -> usize {
        self.sigma_mass.len()
    }

    /// Cellwise gradient `Msigma^{-1} G u` of a CG1 field.
    pub fn cell_gradient(&self, u: &[C64]) -> Vec<C64> {
        let mut g = self.gradient.spmv(u).expect("cg1 length");
        for (gi, m) in g.iter_mut().zip(&self.sigma_mass) {
            *gi /= m;
        }
        g
    }
}

pub fn assemble_core(mesh: &Mesh, cg1: &DofMap, dg0: &DofMap) -> AssembledForms {
    let nv = cg1.num_dofs;
    let nc = mesh.num_cells();
    let mut mass_t = Vec::with_capacity(9 * nc);
    let mut stiff_t = Vec::with_capacity(9 * nc);
    let mut bdry_t = Vec::with_capacity(9 * nc + 4 * mesh.boundary_edges.len());
    let mut grad_t = Vec::with_capacity(6 * nc);
    let mut sigma_mass = vec![0.0; dg0.num_dofs];

    for c in 0..nc {
        let em = ElementMatrices::new(cell_points(mesh, c));
        let dofs = &cg1.cell_dofs[c];
        for a in 0..3 {
            for b in 0..3 {
                mass_t.push((dofs[a], dofs[b], em.mass[a][b]));
                stiff_t.push((dofs[a], dofs[b], em.stiffness[a][b]));
                bdry_t.push((dofs[a], dofs[b], 0.0));
            }
        }
        let sdofs = &dg0.cell_dofs[c];
        for d in 0..2 {
            sigma_mass[sdofs[d]] = em.area;
            for b in 0..3 {
                grad_t.push((sdofs[d], dofs[b], em.coupling[d][b]));
            }
        }
    }
    for e in &mesh.boundary_edges {
        let em = edge_mass(e.length);
        for a in 0..2 {
            for b in 0..2 {
                bdry_t.push((e.vertices[a], e.vertices[b], em[a][b]));
            }
        }
    }

    let gradient = CsrMatrix::from_triplets(dg0.num_dofs, nv, grad_t);
    let gradient_t = gradient.transpose();
    AssembledForms {
        n: mesh.n,
        mass: CsrMatrix::from_triplets(nv, nv, mass_t),
        stiffness: CsrMatrix::from_triplets(nv, nv, stiff_t),
        boundary_mass: CsrMatrix::from_triplets(nv, nv, bdry_t),
        sigma_mass,
        gradient,
        gradient_t,
    }
}

/// Assembles the forms of a mesh with the standard dof maps.
pub fn assemble_mesh(mesh: &Mesh) -> AssembledForms {
    assemble_core(mesh, &DofMap::cg1(mesh), &DofMap::dg0_vec(mesh))
}

/// A CG1 operator `mass * M + boundary * MGamma + stiffness * K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cg1Coefficients {
    pub mass: C64,
    pub boundary: C64,
    pub stiffness: C64,
}

impl Cg1Coefficients {
    pub fn assemble(&self, forms: &AssembledForms) -> ComplexSparseMatrix {
        RealSparseMatrix::combine(&[
            (self.mass, &forms.mass),
            (self.boundary, &forms.boundary_mass),
            (self.stiffness, &forms.stiffness),
        ])
    }

    pub fn scaled(&self, s: C64) -> Self {
        Cg1Coefficients {
            mass: self.mass * s,
            boundary: self.boundary * s,
            stiffness: self.stiffness * s,
        }
    }
}

/// Coefficients of the primal operator `b_delta`.
pub fn primal_coefficients(k: f64, delta: f64) -> Cg1Coefficients {
    let z = C64::new(-delta, k);
    Cg1Coefficients {
        mass: z * z,
        boundary: -z,
        stiffness: C64::new(1.0, 0.0),
    }
}

pub fn assemble_primal_operator(forms: &AssembledForms, k: f64, delta: f64) -> ComplexSparseMatrix {
    primal_coefficients(k, delta).assemble(forms)
}

/// Left- and right-hand operators of the gamma = k primal HSS step, with
/// the shift `delta` (the preconditioner shift, or the physical one when
/// the iteration is used on a shifted system directly).
pub fn hss_primal_coefficients(k: f64, delta: f64) -> (Cg1Coefficients, Cg1Coefficients) {
    let i = C64::new(0.0, 1.0);
    let k2 = k * k;
    let lhs = Cg1Coefficients {
        mass: -2.0 * delta * k2 * i + delta * delta - k2,
        boundary: -k2 * i + delta,
        stiffness: C64::new(1.0, 0.0),
    };
    let c = (k - 1.0) / (k + 1.0);
    let rhs = Cg1Coefficients {
        mass: -2.0 * delta * k2 * i - delta * delta + k2,
        boundary: -k2 * i - delta,
        stiffness: C64::new(-1.0, 0.0),
    }
    .scaled(C64::new(c, 0.0));
    (lhs, rhs)
}

pub fn assemble_hss_primal(forms: &AssembledForms, k: f64, delta: f64) -> (ComplexSparseMatrix, ComplexSparseMatrix) {
    let (l, r) = hss_primal_coefficients(k, delta);
    (l.assemble(forms), r.assemble(forms))
}

/// CG1 operator left after eliminating sigma from the mixed HSS step:
/// `k^2 (delta - i)^2 M + K + k^2 (delta - i) MGamma`.
pub fn hss_mixed_eliminated_coefficients(k: f64, delta: f64) -> Cg1Coefficients {
    let z = C64::new(delta, -1.0);
    Cg1Coefficients {
        mass: k * k * z * z,
        boundary: k * k * z,
        stiffness: C64::new(1.0, 0.0),
    }
}

/// Block action of the mixed form `a_delta` on stacked `(sigma, u)`.
///
/// Row V: `(delta - ik) Msigma sigma - G u`;
/// row Q: `G^T sigma + (delta - ik) M u + MGamma u`.
#[derive(Debug, Clone, Copy)]
pub struct MixedOperator<'a> {
    pub forms: &'a AssembledForms,
    pub k: f64,
    pub delta: f64,
}

impl<'a> MixedOperator<'a> {
    pub fn new(forms: &'a AssembledForms, k: f64, delta: f64) -> Self {
        MixedOperator { forms, k, delta }
    }

    pub fn dim(&self) -> usize {
        self.forms.num_dg0() + self.forms.num_cg1()
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let f = self.forms;
        let ns = f.num_dg0();
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let (sigma, u) = x.split_at(ns);
        let (ys, yu) = y.split_at_mut(ns);
        let z = C64::new(self.delta, -self.k);

        f.gradient.spmv_into(u, ys);
        for ((yi, si), m) in ys.iter_mut().zip(sigma).zip(&f.sigma_mass) {
            *yi = z * m * si - *yi;
        }

        f.gradient_t.spmv_into(sigma, yu);
        for i in 0..u.len() {
            let (cols, mv) = f.mass.row(i);
            let bv = f.boundary_mass.row(i).1;
            let mut acc = C64::new(0.0, 0.0);
            for ((&j, &m), &b) in cols.iter().zip(mv).zip(bv) {
                acc += u[j] * (z * m + b);
            }
            yu[i] += acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

/// Right-hand side source terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// `f = 1` on the whole square.
    Uniform,
    /// Indicator of `[0.4, 0.6]^2`.
    Box,
    /// `f = 0`.
    Zero,
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Source::Uniform => "uniform",
            Source::Box => "box",
            Source::Zero => "zero",
        }
    }

    /// Pointwise value. On the box boundary the indicator takes the mean of
    /// its one-sided limits, so midpoint quadrature is exact on aligned meshes.
    pub fn value(&self, p: [f64; 2]) -> f64 {
        match self {
            Source::Uniform => 1.0,
            Source::Zero => 0.0,
            Source::Box => box_indicator_1d(p[0]) * box_indicator_1d(p[1]),
        }
    }
}

impl std::str::FromStr for Source {
    type Err = crate::error::HelmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Source::Uniform),
            "box" => Ok(Source::Box),
            "zero" => Ok(Source::Zero),
            other => Err(crate::error::HelmError::InvalidConfig(format!(
                "unknown source '{other}'"
            ))),
        }
    }
}

fn box_indicator_1d(x: f64) -> f64 {
    const LO: f64 = 0.4;
    const HI: f64 = 0.6;
    const EPS: f64 = 1e-12;
    if (x - LO).abs() <= EPS || (x - HI).abs() <= EPS {
        0.5
    } else if x > LO && x < HI {
        1.0
    } else {
        0.0
    }
}

/// Load vector `<f, phi_i>` using the edge-midpoint rule on every cell.
pub fn assemble_load(mesh: &Mesh, cg1: &DofMap, source: Source) -> Vec<C64> {
    let mut b = vec![C64::new(0.0, 0.0); cg1.num_dofs];
    for c in 0..mesh.num_cells() {
        let p = cell_points(mesh, c);
        let em = ElementMatrices::new(p);
        let mid = |a: usize, b: usize| [(p[a][0] + p[b][0]) * 0.5, (p[a][1] + p[b][1]) * 0.5];
        // f at the midpoint of the edge opposite vertex i
        let f = [
            source.value(mid(1, 2)),
            source.value(mid(2, 0)),
            source.value(mid(0, 1)),
        ];
        let dofs = &cg1.cell_dofs[c];
        for i in 0..3 {
            // phi_i is 1/2 on the two edges through vertex i, 0 on the opposite one
            let fi = 0.5 * (f[(i + 1) % 3] + f[(i + 2) % 3]);
            b[dofs[i]] += em.area / 3.0 * fi;
        }
    }
    b
}
