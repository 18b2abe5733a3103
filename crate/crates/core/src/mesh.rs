//! Flat base triangulations `Γ_h` with vertices on the surface.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AnalyticSurface, Point3, SurfaceKind};

/// Default structured torus resolution (around the axis × around the tube).
pub const TORUS_BASE_RESOLUTION: (usize, usize) = (16, 8);

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, ascending.
    pub vertices: [usize; 2],
    /// Adjacent triangles in ascending order. A closed manifold has exactly two.
    pub triangles: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BaseMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    level: usize,
    h_max: f64,
    h_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshDiagnostics {
    pub closed: bool,
    pub oriented: bool,
    pub boundary_edges: usize,
    pub euler_characteristic: i64,
    pub max_vertex_deviation: f64,
    /// Max over triangles of circumradius / inradius (2 for equilateral).
    pub shape_regularity: f64,
    /// h_max / h_min.
    pub quasi_uniformity: f64,
}

impl BaseMesh {
    /// Builds a mesh from raw vertices and counterclockwise triangles.
    pub fn from_parts(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>, level: usize) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::config("mesh has no triangles"));
        }
        for t in &triangles {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::config(format!("triangle {t:?} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::config(format!("triangle {t:?} is degenerate")));
            }
        }
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for le in 0..3 {
                let (a, b) = (t[le], t[(le + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        let mut index = BTreeMap::new();
        let edges: Vec<Edge> = map
            .into_iter()
            .enumerate()
            .map(|(i, ((a, b), tris))| {
                index.insert((a, b), i);
                Edge { vertices: [a, b], triangles: tris }
            })
            .collect();
        let triangle_edges = triangles
            .iter()
            .map(|t| {
                let mut e = [0; 3];
                for (le, slot) in e.iter_mut().enumerate() {
                    let (a, b) = (t[le], t[(le + 1) % 3]);
                    *slot = index[&(a.min(b), a.max(b))];
                }
                e
            })
            .collect();
        let mut mesh = Self { vertices, triangles, edges, triangle_edges, level, h_max: 0.0, h_min: 0.0 };
        let (h_max, h_min) = mesh.mesh_size();
        mesh.h_max = h_max;
        mesh.h_min = h_min;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge indices of the local edges (v0,v1), (v1,v2), (v2,v0).
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// `(h_max, h_min)`: extreme triangle diameters (longest edge per triangle).
    pub fn mesh_size(&self) -> (f64, f64) {
        let mut h_max = 0.0f64;
        let mut h_min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(t);
            let diam = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            h_max = h_max.max(diam);
            h_min = h_min.min(diam);
        }
        (h_max, h_min)
    }

    /// Uniform red refinement: every triangle is split into four, new vertices are
    /// the closest-point projections of edge midpoints.
    pub fn refine(&self, surface: &AnalyticSurface) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for e in &self.edges {
            let mid = (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]) * 0.5;
            vertices.push(surface.closest_point(&mid)?);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [eab, ebc, eca] = self.triangle_edges[t];
            let (mab, mbc, mca) = (nv + eab, nv + ebc, nv + eca);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        }
        Self::from_parts(vertices, triangles, self.level + 1)
    }

    pub fn refine_to(&self, surface: &AnalyticSurface, level: usize) -> Result<Self> {
        let mut mesh = self.clone();
        while mesh.level < level {
            mesh = mesh.refine(surface)?;
        }
        Ok(mesh)
    }

    pub fn validate(&self, surface: &AnalyticSurface) -> MeshDiagnostics {
        let boundary_edges = self.edges.iter().filter(|e| e.triangles.len() < 2).count();
        let closed = self.edges.iter().all(|e| e.triangles.len() == 2);

        // Neighbours must traverse each shared edge in opposite directions.
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for le in 0..3 {
                *directed.entry((t[le], t[(le + 1) % 3])).or_default() += 1;
            }
        }
        let consistent = directed.values().all(|&count| count == 1);
        let outward = (0..self.triangles.len()).all(|t| {
            let [a, b, c] = self.triangle_vertices(t);
            let normal = (b - a).cross(&(c - a));
            let centroid = (a + b + c) / 3.0;
            surface.normal(&centroid).map(|n| normal.dot(&n) > 0.0).unwrap_or(false)
        });

        let max_vertex_deviation = self
            .vertices
            .iter()
            .map(|v| surface.signed_distance(v).map(f64::abs).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);

        let shape_regularity = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_vertices(t);
                let (la, lb, lc) = ((c - b).norm(), (a - c).norm(), (b - a).norm());
                let area = 0.5 * (b - a).cross(&(c - a)).norm();
                let circum = la * lb * lc / (4.0 * area);
                let inradius = 2.0 * area / (la + lb + lc);
                circum / inradius
            })
            .fold(0.0, f64::max);

        MeshDiagnostics {
            closed,
            oriented: consistent && outward,
            boundary_edges,
            euler_characteristic: self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64,
            max_vertex_deviation,
            shape_regularity,
            quasi_uniformity: self.h_max / self.h_min,
        }
    }

    /// Writes the mesh in OFF format.
    pub fn write_off<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} {}", self.vertices.len(), self.triangles.len(), self.edges.len())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Level-0 mesh: an icosahedron for the sphere, a structured 16×8 grid for the torus.
pub fn build_base_mesh(surface: &AnalyticSurface) -> Result<BaseMesh> {
    match surface.kind() {
        SurfaceKind::Sphere { radius } => icosahedron(radius),
        SurfaceKind::Torus { major_radius, minor_radius } => {
            let (nu, nv) = TORUS_BASE_RESOLUTION;
            torus_grid(major_radius, minor_radius, nu, nv)
        }
    }
}

fn icosahedron(radius: f64) -> Result<BaseMesh> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut raw = Vec::with_capacity(12);
    for &a in &[-1.0, 1.0] {
        for &b in &[-phi, phi] {
            raw.push(Vector3::new(0.0, a, b));
            raw.push(Vector3::new(a, b, 0.0));
            raw.push(Vector3::new(b, 0.0, a));
        }
    }
    let vertices: Vec<Point3> = raw.iter().map(|v| v * (radius / v.norm())).collect();
    // Faces are the triples of mutually adjacent vertices (edge length 2 before scaling).
    let adjacent = |i: usize, j: usize| ((raw[i] - raw[j]).norm() - 2.0).abs() < 1e-9;
    let mut triangles = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    let (a, b, c) = (raw[i], raw[j], raw[k]);
                    if (b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0 {
                        triangles.push([i, j, k]);
                    } else {
                        triangles.push([i, k, j]);
                    }
                }
            }
        }
    }
    BaseMesh::from_parts(vertices, triangles, 0)
}

fn torus_grid(major: f64, minor: f64, nu: usize, nv: usize) -> Result<BaseMesh> {
    use std::f64::consts::TAU;
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let phi = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let th = TAU * j as f64 / nv as f64;
            let rho = major + minor * th.cos();
            vertices.push(Vector3::new(rho * phi.cos(), rho * phi.sin(), minor * th.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    BaseMesh::from_parts(vertices, triangles, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sphere() -> AnalyticSurface {
        AnalyticSurface::sphere(1.0).unwrap()
    }

    #[test]
    fn icosahedron_combinatorics() {
        let m = build_base_mesh(&sphere()).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles(), m.num_edges()), (12, 20, 30));
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() <= 1e-15);
        }
        let d = m.validate(&sphere());
        assert!(d.closed && d.oriented);
        assert_eq!(d.euler_characteristic, 2);
    }

    #[test]
    fn icosahedron_edge_length() {
        let m = build_base_mesh(&sphere()).unwrap();
        let expected = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert_abs_diff_eq!(m.h_max(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(m.h_max(), 1.0515, epsilon = 1e-4);
        assert_abs_diff_eq!(m.h_min(), expected, epsilon = 1e-14);
    }

    #[test]
    fn torus_grid_counts() {
        let t = AnalyticSurface::torus(2.0, 0.5).unwrap();
        let m = build_base_mesh(&t).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (128, 256));
        let d = m.validate(&t);
        assert_eq!(d.euler_characteristic, 0);
        assert!(d.closed && d.oriented);
        assert!(d.max_vertex_deviation <= 1e-12 * t.diameter());
    }

    #[test]
    fn refinement_counts_and_sizes() {
        let s = sphere();
        let m0 = build_base_mesh(&s).unwrap();
        let m1 = m0.refine(&s).unwrap();
        assert_eq!((m1.num_vertices(), m1.num_triangles(), m1.level()), (42, 80, 1));
        let mut prev = m1.clone();
        for _ in 0..3 {
            let next = prev.refine(&s).unwrap();
            let ratio = next.h_max() / prev.h_max();
            assert!((0.45..=0.55).contains(&ratio), "ratio {ratio}");
            prev = next;
        }
        // Projecting midpoints stretches the central child of a coarse icosahedron face.
        let ratio = m1.h_max() / m0.h_max();
        assert_abs_diff_eq!(ratio, 0.5877852522924732, epsilon = 1e-12);
    }

    #[test]
    fn refined_meshes_keep_invariants() {
        for surface in [sphere(), AnalyticSurface::torus(2.0, 0.5).unwrap()] {
            let mut m = build_base_mesh(&surface).unwrap();
            let chi = if surface.is_sphere() { 2 } else { 0 };
            let mut shape = Vec::new();
            for level in 0..=3 {
                if level > 0 {
                    m = m.refine(&surface).unwrap();
                }
                let d = m.validate(&surface);
                assert!(d.closed && d.oriented, "level {level}");
                assert_eq!(d.euler_characteristic, chi);
                assert!(d.max_vertex_deviation <= 1e-12 * surface.diameter());
                shape.push(d.shape_regularity);
                if surface.is_sphere() {
                    assert!(d.quasi_uniformity <= 2.5, "level {level}: {}", d.quasi_uniformity);
                }
            }
            // shape regularity must not deteriorate under refinement
            let first = shape[1];
            assert!(shape.iter().skip(1).all(|&s| s <= 1.1 * first), "{shape:?}");
        }
    }

    #[test]
    fn single_triangle_size() {
        let v = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
        ];
        let m = BaseMesh::from_parts(v, vec![[0, 1, 2]], 0).unwrap();
        let (hmax, hmin) = m.mesh_size();
        assert_abs_diff_eq!(hmax, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hmin, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn deleted_triangle_opens_the_mesh() {
        let m = build_base_mesh(&sphere()).unwrap();
        let mut tris = m.triangles().to_vec();
        tris.pop();
        let open = BaseMesh::from_parts(m.vertices().to_vec(), tris, 0).unwrap();
        let d = open.validate(&sphere());
        assert!(!d.closed);
        assert_eq!(d.boundary_edges, 3);
    }

    #[test]
    fn flipped_triangle_breaks_orientation() {
        let m = build_base_mesh(&sphere()).unwrap();
        let mut tris = m.triangles().to_vec();
        tris[0].swap(1, 2);
        let flipped = BaseMesh::from_parts(m.vertices().to_vec(), tris, 0).unwrap();
        assert!(!flipped.validate(&sphere()).oriented);
    }

    #[test]
    fn off_export_layout() {
        let m = build_base_mesh(&sphere()).unwrap();
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("12 20 30"));
        assert_eq!(text.lines().count(), 2 + 12 + 20);
        assert!(text.lines().last().unwrap().starts_with("3 "));
    }
}
