use serde::Serialize;

use super::basis::{lagrange_nodes, num_nodes};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::BaseMesh;

/// Continuous global numbering of a scalar degree-`p` Lagrange space:
/// vertex DOFs first, then edge DOFs (edge order, walked from the lower vertex
/// index), then face-interior DOFs.
#[derive(Debug, Clone)]
pub struct ScalarDofMap {
    degree: usize,
    n_dofs: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
}

impl ScalarDofMap {
    pub fn new(mesh: &BaseMesh, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::UnsupportedDegree(0));
        }
        let p = degree;
        let (nv, ne, nf) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_triangles());
        let per_edge = p - 1;
        let per_face = (p - 1) * (p.saturating_sub(2)) / 2;
        let n_dofs = nv + per_edge * ne + per_face * nf;
        let n_local = num_nodes(p);
        let mut cell_dofs = Vec::with_capacity(n_local * nf);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            cell_dofs.extend_from_slice(tri);
            let edges = mesh.triangle_edges(t);
            for le in 0..3 {
                let (a, b) = (tri[le], tri[(le + 1) % 3]);
                let base = nv + per_edge * edges[le];
                for s in 0..per_edge {
                    let pos = if a < b { s } else { per_edge - 1 - s };
                    cell_dofs.push(base + pos);
                }
            }
            let base = nv + per_edge * ne + per_face * t;
            cell_dofs.extend(base..base + per_face);
        }
        Ok(Self { degree, n_dofs, n_local, cell_dofs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.n_local
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.n_local..(t + 1) * self.n_local]
    }

    /// Positions of the global DOFs on the flat triangulation. Each edge node is
    /// computed once from its global edge, so neighbours see identical points.
    pub fn flat_points(&self, mesh: &BaseMesh) -> Vec<Point3> {
        let p = self.degree;
        let pf = p as f64;
        let mut points = vec![Point3::zeros(); self.n_dofs];
        let nv = mesh.num_vertices();
        points[..nv].copy_from_slice(mesh.vertices());
        for (e, edge) in mesh.edges().iter().enumerate() {
            let [a, b] = edge.vertices;
            let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
            for s in 1..p {
                let t = s as f64 / pf;
                points[nv + (p - 1) * e + (s - 1)] = xa * (1.0 - t) + xb * t;
            }
        }
        let nodes = lagrange_nodes(p);
        let first_interior = 3 * p;
        for t in 0..mesh.num_triangles() {
            let [x0, x1, x2] = mesh.triangle_vertices(t);
            let dofs = self.cell_dofs(t);
            for i in first_interior..self.n_local {
                let [u, v] = nodes[i];
                points[dofs[i]] = x0 * (1.0 - u - v) + x1 * u + x2 * v;
            }
        }
        points
    }
}

/// Taylor-Hood DOF layout: degree-`m` velocity (three component-major copies)
/// and degree-`(m−1)` pressure.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub velocity: ScalarDofMap,
    pub pressure: ScalarDofMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofCounts {
    pub scalar_velocity: usize,
    pub n_u: usize,
    pub n_p: usize,
}

impl DofMap {
    pub fn n_scalar(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_u(&self) -> usize {
        3 * self.velocity.n_dofs()
    }

    pub fn n_p(&self) -> usize {
        self.pressure.n_dofs()
    }

    /// Global index of component `c` of scalar velocity DOF `dof`.
    pub fn velocity_index(&self, c: usize, dof: usize) -> usize {
        c * self.velocity.n_dofs() + dof
    }

    pub fn counts(&self) -> DofCounts {
        DofCounts { scalar_velocity: self.n_scalar(), n_u: self.n_u(), n_p: self.n_p() }
    }
}

pub fn build_dofmap(mesh: &BaseMesh, m: usize) -> Result<DofMap> {
    if m < 2 {
        return Err(Error::config(format!("Taylor-Hood velocity degree must be at least 2, got {m}")));
    }
    Ok(DofMap { velocity: ScalarDofMap::new(mesh, m)?, pressure: ScalarDofMap::new(mesh, m - 1)? })
}
