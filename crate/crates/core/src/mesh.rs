//! Uniform right-triangulated meshes of the unit square.
//!
//! Vertices are numbered lexicographically by `(iy, ix)`, so vertex `(ix, iy)`
//! has index `iy * (n + 1) + ix`. Every lattice square is split along the
//! diagonal from its lower-left to its upper-right corner, which keeps the
//! mesh invariant under the reflection `x <-> y` and makes each mesh the
//! edge-midpoint refinement of the mesh with half the resolution.

use crate::error::{HelmError, Result};

/// A boundary edge of the unit square, stored as a vertex pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Cells per direction.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Vertex index of lattice point `(ix, iy)`.
    #[inline]
    pub fn vertex_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.n + 1) + ix
    }

    /// Signed area of a cell (positive for counter-clockwise ordering).
    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let n = self.n;
        let (ix, iy) = (v % (n + 1), v / (n + 1));
        ix == 0 || iy == 0 || ix == n || iy == n
    }

    /// Index of the vertex obtained by swapping the two coordinates.
    pub fn reflect_vertex(&self, v: usize) -> usize {
        let n = self.n;
        let (ix, iy) = (v % (n + 1), v / (n + 1));
        self.vertex_index(iy, ix)
    }
}

/// Builds the uniform mesh with `n` cells per direction.
pub fn build_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(HelmError::InvalidResolution(
            "cells per direction must be at least 1".into(),
        ));
    }
    let nv = n + 1;
    let nf = n as f64;
    let mut vertices = Vec::with_capacity(nv * nv);
    for iy in 0..nv {
        for ix in 0..nv {
            // Division, not accumulation: nested meshes share bit-identical coordinates.
            vertices.push([ix as f64 / nf, iy as f64 / nf]);
        }
    }

    let idx = |ix: usize, iy: usize| iy * nv + ix;
    let mut cells = Vec::with_capacity(2 * n * n);
    for iy in 0..n {
        for ix in 0..n {
            let v00 = idx(ix, iy);
            let v10 = idx(ix + 1, iy);
            let v11 = idx(ix + 1, iy + 1);
            let v01 = idx(ix, iy + 1);
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let length = 1.0 / nf;
    let mut boundary_edges = Vec::with_capacity(4 * n);
    let mut push = |a: usize, b: usize| {
        boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            length,
        })
    };
    for i in 0..n {
        push(idx(i, 0), idx(i + 1, 0));
    }
    for i in 0..n {
        push(idx(n, i), idx(n, i + 1));
    }
    for i in (0..n).rev() {
        push(idx(i + 1, n), idx(i, n));
    }
    for i in (0..n).rev() {
        push(idx(0, i + 1), idx(0, i));
    }

    Ok(Mesh {
        n,
        vertices,
        cells,
        boundary_edges,
    })
}

/// Nested meshes ordered from coarsest to finest.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<Mesh>,
}

impl MeshHierarchy {
    pub fn finest(&self) -> &Mesh {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn coarsest(&self) -> &Mesh {
        &self.levels[0]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

pub fn build_hierarchy(n_fine: usize, levels: usize) -> Result<MeshHierarchy> {
    if levels == 0 {
        return Err(HelmError::InvalidResolution("need at least one level".into()));
    }
    let factor = 1usize << (levels - 1);
    if n_fine == 0 || !n_fine.is_multiple_of(factor) {
        return Err(HelmError::InvalidResolution(format!(
            "{n_fine} cells per direction cannot be coarsened {} times by a factor of 2 \
             (must be a positive multiple of {factor})",
            levels - 1
        )));
    }
    let coarsest = n_fine / factor;
    let levels = (0..levels)
        .map(|l| build_mesh(coarsest << l))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeshHierarchy { levels })
}

/// Cells per direction needed to resolve wavenumber `k`: `ceil(c0 k^{3/2})`
/// rounded up to a multiple of `2^(levels-1)`.
pub fn resolution_for(k: f64, c0: f64, levels: usize) -> usize {
    let base = (c0 * k.powf(1.5)).ceil().max(1.0) as usize;
    let factor = 1usize << levels.saturating_sub(1);
    base.div_ceil(factor) * factor
}

/// Finite element space of a [`DofMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Continuous piecewise linears, one dof per vertex.
    Cg1,
    /// Piecewise constant 2-vectors, dofs `2c` and `2c + 1` on cell `c`.
    Dg0Vec,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: Space,
    pub num_dofs: usize,
    pub cell_dofs: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn cg1(mesh: &Mesh) -> Self {
        DofMap {
            space: Space::Cg1,
            num_dofs: mesh.num_vertices(),
            cell_dofs: mesh.cells.iter().map(|c| c.to_vec()).collect(),
        }
    }

    pub fn dg0_vec(mesh: &Mesh) -> Self {
        DofMap {
            space: Space::Dg0Vec,
            num_dofs: 2 * mesh.num_cells(),
            cell_dofs: (0..mesh.num_cells()).map(|c| vec![2 * c, 2 * c + 1]).collect(),
        }
    }
}
