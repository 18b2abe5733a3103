//! Degree-`k` parametric lift `π_k` of a flat triangulation onto a curved
//! polynomial surface `Γ_h^k`, with its discrete normal and Weingarten map.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::error::{Error, Result};
use crate::fe_space::basis::{ReferenceBasis, Tabulation};
use crate::fe_space::dofmap::ScalarDofMap;
use crate::fe_space::quadrature::{quadrature, QuadratureRule};
use crate::geometry::{AnalyticSurface, Point3};
use crate::mesh::BaseMesh;

/// Differential geometry of `Γ_h^k` at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct LiftGeometry {
    pub x: Point3,
    /// Columns ∂x/∂ξ₁, ∂x/∂ξ₂.
    pub jac: Matrix3x2<f64>,
    /// Inverse metric (JᵀJ)⁻¹.
    pub g_inv: Matrix2<f64>,
    /// Area element relative to the reference triangle, √det(JᵀJ).
    pub mu: f64,
    pub normal: Vector3<f64>,
    pub weingarten: Matrix3<f64>,
}

impl LiftGeometry {
    pub fn projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal * self.normal.transpose()
    }

    /// Maps a reference gradient to the tangential surface gradient J G⁻¹ ∇_ξ.
    pub fn surface_gradient(&self, grad_ref: [f64; 2]) -> Vector3<f64> {
        let g = self.g_inv * nalgebra::Vector2::new(grad_ref[0], grad_ref[1]);
        self.jac * g
    }
}

/// Evaluates the lift with nodal positions `nodes` from basis data at one point.
pub fn lift_geometry(nodes: &[Point3], values: &[f64], gradients: &[[f64; 2]], hessians: &[[f64; 3]]) -> LiftGeometry {
    let mut x = Point3::zeros();
    let (mut j1, mut j2) = (Vector3::zeros(), Vector3::zeros());
    let (mut x11, mut x12, mut x22) = (Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
    for (i, node) in nodes.iter().enumerate() {
        x += node * values[i];
        j1 += node * gradients[i][0];
        j2 += node * gradients[i][1];
        x11 += node * hessians[i][0];
        x12 += node * hessians[i][1];
        x22 += node * hessians[i][2];
    }
    let jac = Matrix3x2::from_columns(&[j1, j2]);
    let g = jac.transpose() * jac;
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let g_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
    let c = j1.cross(&j2);
    let c_norm = c.norm();
    let normal = c / c_norm;
    let p = Matrix3::identity() - normal * normal.transpose();
    let dn1 = p * (x11.cross(&j2) + j1.cross(&x12)) / c_norm;
    let dn2 = p * (x12.cross(&j2) + j1.cross(&x22)) / c_norm;
    let dn = Matrix3x2::from_columns(&[dn1, dn2]);
    let weingarten = dn * g_inv * jac.transpose();
    LiftGeometry { x, jac, g_inv, mu: det.max(0.0).sqrt(), normal, weingarten }
}

/// One curved element of `Γ_h^k`.
#[derive(Debug, Clone)]
pub struct LiftedElement {
    pub index: usize,
    pub flat: [Point3; 3],
    /// Images `π(x_j)` of the degree-`k` Lagrange nodes, in reference node order.
    pub nodes: Vec<Point3>,
    basis: Arc<ReferenceBasis>,
}

impl LiftedElement {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    /// Flat point `chart(ξ)` on the base triangle.
    pub fn chart(&self, xi: [f64; 2]) -> Point3 {
        let [a, b, c] = self.flat;
        a * (1.0 - xi[0] - xi[1]) + b * xi[0] + c * xi[1]
    }

    pub fn geometry(&self, xi: [f64; 2]) -> LiftGeometry {
        let (v, g, h) = self.basis.evaluate_owned(xi);
        lift_geometry(&self.nodes, &v, &g, &h)
    }

    pub fn geometry_at(&self, tab: &Tabulation, q: usize) -> LiftGeometry {
        lift_geometry(&self.nodes, tab.values_at(q), tab.gradients_at(q), tab.hessians_at(q))
    }

    /// `(π_k(chart(ξ)), J, μ)`.
    pub fn eval_lift(&self, xi: [f64; 2]) -> (Point3, Matrix3x2<f64>, f64) {
        let g = self.geometry(xi);
        (g.x, g.jac, g.mu)
    }

    pub fn discrete_normal(&self, xi: [f64; 2]) -> Vector3<f64> {
        self.geometry(xi).normal
    }

    pub fn discrete_weingarten(&self, xi: [f64; 2]) -> Matrix3<f64> {
        self.geometry(xi).weingarten
    }
}

/// Lifts a single flat triangle, computing its nodes locally.
pub fn lift_element(flat: [Point3; 3], surface: &AnalyticSurface, k: usize) -> Result<LiftedElement> {
    let basis = Arc::new(ReferenceBasis::new(k)?);
    let nodes = basis
        .nodes()
        .iter()
        .map(|&[u, v]| surface.closest_point(&(flat[0] * (1.0 - u - v) + flat[1] * u + flat[2] * v)))
        .collect::<Result<Vec<_>>>()?;
    let elem = LiftedElement { index: 0, flat, nodes, basis };
    check_element(&elem, surface, &quadrature(2 * k + 2)?)?;
    Ok(elem)
}

fn check_element(elem: &LiftedElement, surface: &AnalyticSurface, rule: &QuadratureRule) -> Result<()> {
    let [a, b, c] = elem.flat;
    let flat_scale = (b - a).cross(&(c - a)).norm();
    let tab = elem.basis.tabulate(rule);
    for q in 0..rule.len() {
        let g = elem.geometry_at(&tab, q);
        if !(g.mu > 1e-10 * flat_scale) {
            return Err(Error::DegenerateLift { element: elem.index, reason: format!("Jacobian rank < 2 (μ = {:e})", g.mu) });
        }
        if g.normal.dot(&surface.normal(&g.x)?) <= 0.0 {
            return Err(Error::DegenerateLift { element: elem.index, reason: "lifted element is inverted".into() });
        }
    }
    Ok(())
}

/// The lifted surface `Γ_h^k`: a base mesh with one lifted node per global
/// geometry DOF, shared by all elements touching it.
#[derive(Debug, Clone)]
pub struct LiftedMesh {
    mesh: BaseMesh,
    surface: AnalyticSurface,
    dofs: ScalarDofMap,
    basis: Arc<ReferenceBasis>,
    nodes: Vec<Point3>,
}

impl LiftedMesh {
    pub fn new(mesh: &BaseMesh, surface: &AnalyticSurface, k: usize) -> Result<Self> {
        let basis = Arc::new(ReferenceBasis::new(k)?);
        let dofs = ScalarDofMap::new(mesh, k)?;
        let nodes = dofs
            .flat_points(mesh)
            .iter()
            .map(|x| surface.closest_point(x))
            .collect::<Result<Vec<_>>>()?;
        let lifted = Self { mesh: mesh.clone(), surface: *surface, dofs, basis, nodes };
        let rule = quadrature(2 * k + 2)?;
        for t in 0..lifted.num_elements() {
            check_element(&lifted.element(t), surface, &rule)?;
        }
        Ok(lifted)
    }

    pub fn mesh(&self) -> &BaseMesh {
        &self.mesh
    }

    pub fn surface(&self) -> &AnalyticSurface {
        &self.surface
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn h(&self) -> f64 {
        self.mesh.h_max()
    }

    /// Lifted geometry nodes, indexed by global geometry DOF.
    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn element(&self, t: usize) -> LiftedElement {
        LiftedElement {
            index: t,
            flat: self.mesh.triangle_vertices(t),
            nodes: self.dofs.cell_dofs(t).iter().map(|&i| self.nodes[i]).collect(),
            basis: Arc::clone(&self.basis),
        }
    }

    /// Positions `π_k(x_j)` on `Γ_h^k` of the global DOFs of another Lagrange space.
    pub fn node_positions(&self, space: &ScalarDofMap, basis: &ReferenceBasis) -> Vec<Point3> {
        let mut out = vec![Point3::zeros(); space.n_dofs()];
        let mut done = vec![false; space.n_dofs()];
        let n = self.basis.len();
        let (mut v, mut g, mut h) = (vec![0.0; n], vec![[0.0; 2]; n], vec![[0.0; 3]; n]);
        for t in 0..self.num_elements() {
            let elem = self.element(t);
            for (i, &dof) in space.cell_dofs(t).iter().enumerate() {
                if done[dof] {
                    continue;
                }
                self.basis.evaluate(basis.nodes()[i], &mut v, &mut g, &mut h);
                out[dof] = elem.nodes.iter().zip(&v).map(|(x, &phi)| x * phi).sum();
                done[dof] = true;
            }
        }
        out
    }

    /// Nodal interpolant of `f ∘ π` in the Lagrange space `space`.
    pub fn interpolate<F>(&self, space: &ScalarDofMap, basis: &ReferenceBasis, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&Point3) -> f64,
    {
        self.node_positions(space, basis)
            .iter()
            .map(|p| Ok(f(&self.surface.closest_point(p)?)))
            .collect()
    }

    /// Total area of `Γ_h^k` computed with `rule`.
    pub fn area(&self, rule: &QuadratureRule) -> f64 {
        let tab = self.basis.tabulate(rule);
        (0..self.num_elements())
            .map(|t| {
                let e = self.element(t);
                (0..rule.len()).map(|q| rule.weights()[q] * e.geometry_at(&tab, q).mu).sum::<f64>()
            })
            .sum()
    }
}

/// Componentwise degree-`m` nodal interpolant `n̂` of the exact normal.
#[derive(Debug, Clone)]
pub struct ImprovedNormalField {
    pub coefficients: Vec<Vector3<f64>>,
}

impl ImprovedNormalField {
    /// Value on an element from its local DOFs and basis values.
    pub fn eval(&self, dofs: &[usize], values: &[f64]) -> Vector3<f64> {
        dofs.iter().zip(values).map(|(&d, &phi)| self.coefficients[d] * phi).sum()
    }
}

/// Requires `m ≥ k`: nodal interpolation then reaches the order `k+1` the penalty needs.
pub fn build_improved_normal(
    lifted: &LiftedMesh,
    velocity: &ScalarDofMap,
    velocity_basis: &ReferenceBasis,
) -> Result<ImprovedNormalField> {
    let (m, k) = (velocity.degree(), lifted.degree());
    if m < k {
        return Err(Error::config(format!(
            "improved normal needs velocity degree ≥ geometry degree (m = {m}, k = {k})"
        )));
    }
    let coefficients = lifted
        .node_positions(velocity, velocity_basis)
        .iter()
        .map(|p| lifted.surface().normal(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImprovedNormalField { coefficients })
}

/// Pointwise sup-norm geometry errors of `Γ_h^k` sampled at quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricErrors {
    pub distance: f64,
    pub normal: f64,
    pub weingarten: f64,
}

pub fn geometric_errors(lifted: &LiftedMesh, rule: &QuadratureRule) -> Result<GeometricErrors> {
    let tab = lifted.basis().tabulate(rule);
    let mut out = GeometricErrors { distance: 0.0, normal: 0.0, weingarten: 0.0 };
    for t in 0..lifted.num_elements() {
        let e = lifted.element(t);
        for q in 0..rule.len() {
            let g = e.geometry_at(&tab, q);
            let data = lifted.surface().geometric_data(&g.x)?;
            let on_surface = lifted.surface().geometric_data(&data.pi_x)?;
            out.distance = out.distance.max(data.d.abs());
            out.normal = out.normal.max((data.n - g.normal).norm());
            out.weingarten = out.weingarten.max((on_surface.h - g.weingarten).norm());
        }
    }
    Ok(out)
}

/// `sup ‖n∘π − n̂‖` over the quadrature points of `rule` on `Γ_h^k`.
pub fn improved_normal_error(
    lifted: &LiftedMesh,
    field: &ImprovedNormalField,
    velocity: &ScalarDofMap,
    velocity_basis: &ReferenceBasis,
    rule: &QuadratureRule,
) -> Result<f64> {
    let geo_tab = lifted.basis().tabulate(rule);
    let vel_tab = velocity_basis.tabulate(rule);
    let mut sup = 0.0f64;
    for t in 0..lifted.num_elements() {
        let e = lifted.element(t);
        for q in 0..rule.len() {
            let x = e.geometry_at(&geo_tab, q).x;
            let n_hat = field.eval(velocity.cell_dofs(t), vel_tab.values_at(q));
            sup = sup.max((lifted.surface().normal(&x)? - n_hat).norm());
        }
    }
    Ok(sup)
}
