//! Element-loop assembly of the lifted Taylor-Hood saddle-point system.

pub mod sparse;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fe_space::{build_dofmap, quadrature, DofMap, QuadratureRule, ReferenceBasis, Tabulation};
use crate::geometry::{AnalyticSurface, Point3};
use crate::lift::{build_improved_normal, ImprovedNormalField, LiftGeometry, LiftedMesh};
use crate::mesh::BaseMesh;

/// Normal used inside the tangential penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyNormal {
    /// Nodal interpolant of the exact normal in the velocity space.
    Improved,
    /// Normal of the lifted surface `Γ_h^k`.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    /// Penalty weight is `η = h^(−penalty_exponent)`.
    pub penalty_exponent: f64,
    pub penalty_normal: PenaltyNormal,
    /// Defaults to `2m + 2k`.
    pub quadrature_exactness: Option<usize>,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self { penalty_exponent: 2.0, penalty_normal: PenaltyNormal::Improved, quadrature_exactness: None }
    }
}

/// Right-hand side data evaluated at points of the exact surface.
pub trait StokesData: Sync {
    /// Tangential forcing `f`.
    fn forcing(&self, x: &Point3) -> Vector3<f64>;
    /// Divergence source `g`.
    fn source(&self, x: &Point3) -> f64;
}

/// Geometry and basis data at one quadrature point of one element.
pub struct QuadPoint<'a> {
    /// Quadrature weight times the area element.
    pub weight: f64,
    pub geo: LiftGeometry,
    pub vel_values: &'a [f64],
    pub vel_grads: Vec<Vector3<f64>>,
    pub pres_values: &'a [f64],
    pub pres_grads: Vec<Vector3<f64>>,
}

/// Lifted Taylor-Hood pair `P_m³ × P_{m−1}` on `Γ_h^k`.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    pub lifted: LiftedMesh,
    pub dofs: DofMap,
    pub vel_basis: ReferenceBasis,
    pub pres_basis: ReferenceBasis,
    pub rule: QuadratureRule,
    pub improved_normal: Option<ImprovedNormalField>,
    pub config: AssemblyConfig,
    geo_tab: Tabulation,
    vel_tab: Tabulation,
    pres_tab: Tabulation,
}

impl TaylorHoodSpace {
    pub fn new(mesh: &BaseMesh, surface: &AnalyticSurface, k: usize, m: usize, config: AssemblyConfig) -> Result<Self> {
        if m < 2 {
            return Err(Error::config(format!("Taylor-Hood velocity degree must be at least 2, got {m}")));
        }
        if k == 0 {
            return Err(Error::config("geometry degree must be at least 1"));
        }
        if config.penalty_normal == PenaltyNormal::Improved && m < k {
            return Err(Error::config(format!(
                "the improved penalty normal needs velocity degree ≥ geometry degree (m = {m}, k = {k})"
            )));
        }
        if !(config.penalty_exponent.is_finite() && config.penalty_exponent >= 0.0) {
            return Err(Error::config(format!("invalid penalty exponent {}", config.penalty_exponent)));
        }
        let lifted = LiftedMesh::new(mesh, surface, k)?;
        let dofs = build_dofmap(mesh, m)?;
        let vel_basis = ReferenceBasis::new(m)?;
        let pres_basis = ReferenceBasis::new(m - 1)?;
        let rule = quadrature(config.quadrature_exactness.unwrap_or(2 * m + 2 * k))?;
        let improved_normal =
            if m >= k { Some(build_improved_normal(&lifted, &dofs.velocity, &vel_basis)?) } else { None };
        let geo_tab = lifted.basis().tabulate(&rule);
        let vel_tab = vel_basis.tabulate(&rule);
        let pres_tab = pres_basis.tabulate(&rule);
        Ok(Self { lifted, dofs, vel_basis, pres_basis, rule, improved_normal, config, geo_tab, vel_tab, pres_tab })
    }

    pub fn surface(&self) -> &AnalyticSurface {
        self.lifted.surface()
    }

    pub fn geom_degree(&self) -> usize {
        self.lifted.degree()
    }

    pub fn velocity_degree(&self) -> usize {
        self.vel_basis.degree()
    }

    pub fn h(&self) -> f64 {
        self.lifted.h()
    }

    pub fn eta(&self) -> f64 {
        self.h().powf(-self.config.penalty_exponent)
    }

    pub fn n_u(&self) -> usize {
        self.dofs.n_u()
    }

    pub fn n_p(&self) -> usize {
        self.dofs.n_p()
    }

    pub fn num_elements(&self) -> usize {
        self.lifted.num_elements()
    }

    pub fn quadrature_points(&self, t: usize) -> Vec<QuadPoint<'_>> {
        let elem = self.lifted.element(t);
        (0..self.rule.len())
            .map(|q| {
                let geo = elem.geometry_at(&self.geo_tab, q);
                QuadPoint {
                    weight: self.rule.weights()[q] * geo.mu,
                    vel_values: self.vel_tab.values_at(q),
                    vel_grads: self.vel_tab.gradients_at(q).iter().map(|&g| geo.surface_gradient(g)).collect(),
                    pres_values: self.pres_tab.values_at(q),
                    pres_grads: self.pres_tab.gradients_at(q).iter().map(|&g| geo.surface_gradient(g)).collect(),
                    geo,
                }
            })
            .collect()
    }

    /// Velocity value and surface gradient `∇v P_h` (row `c` = gradient of component `c`).
    pub fn eval_velocity(&self, coeffs: &[f64], t: usize, qp: &QuadPoint) -> (Vector3<f64>, Matrix3<f64>) {
        let ns = self.dofs.n_scalar();
        let mut v = Vector3::zeros();
        let mut g = Matrix3::zeros();
        for (i, &dof) in self.dofs.velocity.cell_dofs(t).iter().enumerate() {
            for c in 0..3 {
                let coef = coeffs[c * ns + dof];
                v[c] += coef * qp.vel_values[i];
                for j in 0..3 {
                    g[(c, j)] += coef * qp.vel_grads[i][j];
                }
            }
        }
        (v, g)
    }

    pub fn eval_pressure(&self, coeffs: &[f64], t: usize, qp: &QuadPoint) -> (f64, Vector3<f64>) {
        let mut p = 0.0;
        let mut g = Vector3::zeros();
        for (a, &dof) in self.dofs.pressure.cell_dofs(t).iter().enumerate() {
            p += coeffs[dof] * qp.pres_values[a];
            g += qp.pres_grads[a] * coeffs[dof];
        }
        (p, g)
    }

    /// Penalty normal at a quadrature point.
    pub fn penalty_normal(&self, t: usize, qp: &QuadPoint) -> Vector3<f64> {
        match (self.config.penalty_normal, &self.improved_normal) {
            (PenaltyNormal::Improved, Some(field)) => field.eval(self.dofs.velocity.cell_dofs(t), qp.vel_values),
            _ => qp.geo.normal,
        }
    }

    /// Sum over elements of `f(t, qp)` weighted by the quadrature, reduced in element order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(usize, &QuadPoint) -> Result<f64> + Sync,
    {
        let parts = (0..self.num_elements())
            .into_par_iter()
            .map(|t| self.quadrature_points(t).iter().map(|qp| Ok(qp.weight * f(t, qp)?)).sum::<Result<f64>>())
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum())
    }

    /// Nodal interpolant of `u ∘ π` (component-major).
    pub fn interpolate_velocity<F>(&self, u: F) -> Result<Vec<f64>>
    where
        F: Fn(&Point3) -> Vector3<f64>,
    {
        let ns = self.dofs.n_scalar();
        let mut out = vec![0.0; 3 * ns];
        let pos = self.lifted.node_positions(&self.dofs.velocity, &self.vel_basis);
        for (i, p) in pos.iter().enumerate() {
            let val = u(&self.surface().closest_point(p)?);
            for c in 0..3 {
                out[c * ns + i] = val[c];
            }
        }
        Ok(out)
    }

    pub fn interpolate_pressure<F>(&self, p: F) -> Result<Vec<f64>>
    where
        F: Fn(&Point3) -> f64,
    {
        self.lifted.interpolate(&self.dofs.pressure, &self.pres_basis, p)
    }

    /// `E_{T,h}(φ_j e_c)` at reference point `ξ` of element `t`.
    pub fn strain_et(&self, t: usize, j: usize, c: usize, xi: [f64; 2]) -> Matrix3<f64> {
        let geo = self.lifted.element(t).geometry(xi);
        let (v, g, _) = self.vel_basis.evaluate_owned(xi);
        strain(&geo, &geo.projector(), v[j], &geo.surface_gradient(g[j]), c)
    }

    /// `‖E_{T,h}(v)‖_{L²(Γ_h^k)}` of a velocity coefficient vector.
    pub fn strain_norm(&self, coeffs: &[f64]) -> Result<f64> {
        Ok(self
            .integrate(|t, qp| {
                let (v, grad) = self.eval_velocity(coeffs, t, qp);
                let p = qp.geo.projector();
                let pg = p * grad * p;
                let e = (pg + pg.transpose()) * 0.5 - qp.geo.weingarten * v.dot(&qp.geo.normal);
                Ok(e.norm_squared())
            })?
            .sqrt())
    }
}

/// `E_{T,h}(φ e_c) = sym(P e_c sᵀ) − φ (n_h)_c H_h` where `s` is the surface gradient of `φ`.
fn strain(geo: &LiftGeometry, p: &Matrix3<f64>, phi: f64, s: &Vector3<f64>, c: usize) -> Matrix3<f64> {
    let outer = p.column(c) * s.transpose();
    (outer + outer.transpose()) * 0.5 - geo.weingarten * (phi * geo.normal[c])
}

/// Assembled algebraic saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// `a_h + k_h`, `n_u × n_u`.
    pub a: CsrMatrix,
    /// `b_h(u, q) = ∫ u·∇q`, `n_p × n_u`.
    pub b: CsrMatrix,
    /// `b_h*(u, q) = −∫ div u q`, `n_p × n_u`.
    pub b_star: CsrMatrix,
    pub m_u: CsrMatrix,
    pub m_p: CsrMatrix,
    /// Gram matrix of the energy norm `‖v‖² + ‖∇v P_h‖² + h⁻²‖n·v‖²`.
    pub energy: CsrMatrix,
    pub rhs_f: Vec<f64>,
    pub rhs_g: Vec<f64>,
    /// `M_p 1`.
    pub mean_vec: Vec<f64>,
    pub h: f64,
    pub eta: f64,
    pub config: AssemblyConfig,
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.b.nrows()
    }
}

struct LocalBlocks {
    vel: Vec<usize>,
    pres: Vec<usize>,
    a: Vec<f64>,
    energy: Vec<f64>,
    m_u: Vec<f64>,
    b: Vec<f64>,
    b_star: Vec<f64>,
    m_p: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    g_integral: f64,
    area: f64,
}

fn local_blocks(space: &TaylorHoodSpace, t: usize, data: Option<&dyn StokesData>, eta: f64) -> Result<LocalBlocks> {
    let nl = space.vel_basis.len();
    let np = space.pres_basis.len();
    let nv = 3 * nl;
    let ns = space.dofs.n_scalar();
    let h_inv2 = space.h().powi(-2);
    let surface = space.surface();
    let cell = space.dofs.velocity.cell_dofs(t);
    let mut out = LocalBlocks {
        vel: (0..3).flat_map(|c| cell.iter().map(move |&d| c * ns + d)).collect(),
        pres: space.dofs.pressure.cell_dofs(t).to_vec(),
        a: vec![0.0; nv * nv],
        energy: vec![0.0; nv * nv],
        m_u: vec![0.0; nl * nl],
        b: vec![0.0; np * nv],
        b_star: vec![0.0; np * nv],
        m_p: vec![0.0; np * np],
        f: vec![0.0; nv],
        g: vec![0.0; np],
        g_integral: 0.0,
        area: 0.0,
    };
    let mut strains = vec![Matrix3::zeros(); nv];
    for qp in space.quadrature_points(t) {
        let w = qp.weight;
        let geo = &qp.geo;
        let p = geo.projector();
        let n_pen = space.penalty_normal(t, &qp);
        for c in 0..3 {
            for i in 0..nl {
                strains[c * nl + i] = strain(geo, &p, qp.vel_values[i], &qp.vel_grads[i], c);
            }
        }
        let (f_val, g_val) = match data {
            Some(d) => {
                let x = surface.geometric_data(&geo.x)?;
                (d.forcing(&x.pi_x), d.source(&x.pi_x))
            }
            None => (Vector3::zeros(), 0.0),
        };
        let n_exact = surface.normal(&geo.x)?;
        out.area += w;
        out.g_integral += w * g_val;

        for i in 0..nl {
            let phi_i = qp.vel_values[i];
            for j in 0..nl {
                let phi_j = qp.vel_values[j];
                let mass = w * phi_i * phi_j;
                let stiff = w * qp.vel_grads[i].dot(&qp.vel_grads[j]);
                out.m_u[i * nl + j] += mass;
                for c in 0..3 {
                    let row = c * nl + i;
                    for d in 0..3 {
                        let col = d * nl + j;
                        if col < row {
                            continue;
                        }
                        let strain_term = strains[row].component_mul(&strains[col]).sum();
                        out.a[row * nv + col] += w * strain_term + mass * (p[(c, d)] + eta * n_pen[c] * n_pen[d]);
                        let diag = if c == d { mass + stiff } else { 0.0 };
                        out.energy[row * nv + col] += diag + mass * h_inv2 * n_exact[c] * n_exact[d];
                    }
                }
            }
            for c in 0..3 {
                out.f[c * nl + i] += w * f_val[c] * phi_i;
            }
        }
        for a in 0..np {
            let psi = qp.pres_values[a];
            for c in 0..3 {
                for i in 0..nl {
                    out.b[a * nv + c * nl + i] += w * qp.vel_values[i] * qp.pres_grads[a][c];
                    out.b_star[a * nv + c * nl + i] -= w * psi * qp.vel_grads[i][c];
                }
            }
            for b in 0..np {
                out.m_p[a * np + b] += w * psi * qp.pres_values[b];
            }
            out.g[a] += w * g_val * psi;
        }
    }
    // Mirror the upper triangles so local blocks are exactly symmetric.
    for row in 0..nv {
        for col in 0..row {
            out.a[row * nv + col] = out.a[col * nv + row];
            out.energy[row * nv + col] = out.energy[col * nv + row];
        }
    }
    for i in 0..nl {
        for j in 0..i {
            out.m_u[i * nl + j] = out.m_u[j * nl + i];
        }
    }
    for a in 0..np {
        for b in 0..a {
            out.m_p[a * np + b] = out.m_p[b * np + a];
        }
    }
    Ok(out)
}

/// Assembles all matrices and right-hand sides; `data = None` means zero data.
pub fn assemble(space: &TaylorHoodSpace, data: Option<&dyn StokesData>) -> Result<SaddleSystem> {
    let eta = space.eta();
    let locals = (0..space.num_elements())
        .into_par_iter()
        .map(|t| local_blocks(space, t, data, eta))
        .collect::<Result<Vec<_>>>()?;

    let (n_u, n_p) = (space.n_u(), space.n_p());
    let nl = space.vel_basis.len();
    let np = space.pres_basis.len();
    let nv = 3 * nl;
    let mut a = Vec::with_capacity(locals.len() * nv * nv);
    let mut energy = Vec::with_capacity(locals.len() * nv * nv);
    let mut m_u = Vec::with_capacity(locals.len() * 3 * nl * nl);
    let mut b = Vec::with_capacity(locals.len() * np * nv);
    let mut b_star = Vec::with_capacity(locals.len() * np * nv);
    let mut m_p = Vec::with_capacity(locals.len() * np * np);
    let mut rhs_f = vec![0.0; n_u];
    let mut g_raw = vec![0.0; n_p];
    let (mut g_integral, mut area) = (0.0, 0.0);
    for loc in &locals {
        for (r, &gr) in loc.vel.iter().enumerate() {
            for (c, &gc) in loc.vel.iter().enumerate() {
                a.push((gr, gc, loc.a[r * nv + c]));
                energy.push((gr, gc, loc.energy[r * nv + c]));
            }
            rhs_f[gr] += loc.f[r];
        }
        for comp in 0..3 {
            for i in 0..nl {
                for j in 0..nl {
                    m_u.push((loc.vel[comp * nl + i], loc.vel[comp * nl + j], loc.m_u[i * nl + j]));
                }
            }
        }
        for (r, &gr) in loc.pres.iter().enumerate() {
            for (c, &gc) in loc.vel.iter().enumerate() {
                b.push((gr, gc, loc.b[r * nv + c]));
                b_star.push((gr, gc, loc.b_star[r * nv + c]));
            }
            for (c, &gc) in loc.pres.iter().enumerate() {
                m_p.push((gr, gc, loc.m_p[r * np + c]));
            }
            g_raw[gr] += loc.g[r];
        }
        g_integral += loc.g_integral;
        area += loc.area;
    }
    let m_p = CsrMatrix::from_triplets(n_p, n_p, m_p);
    let mean_vec = m_p.mul_vec(&vec![1.0; n_p])?;
    let g_mean = g_integral / area;
    let rhs_g = g_raw.iter().zip(&mean_vec).map(|(g, m)| -(g - g_mean * m)).collect();
    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(n_u, n_u, a),
        b: CsrMatrix::from_triplets(n_p, n_u, b),
        b_star: CsrMatrix::from_triplets(n_p, n_u, b_star),
        m_u: CsrMatrix::from_triplets(n_u, n_u, m_u),
        m_p,
        energy: CsrMatrix::from_triplets(n_u, n_u, energy),
        rhs_f,
        rhs_g,
        mean_vec,
        h: space.h(),
        eta,
        config: space.config,
    })
}

/// Builds the lifted space and assembles the system in one step.
pub fn assemble_system(
    mesh: &BaseMesh,
    surface: &AnalyticSurface,
    k: usize,
    m: usize,
    data: Option<&dyn StokesData>,
    config: AssemblyConfig,
) -> Result<(TaylorHoodSpace, SaddleSystem)> {
    let space = TaylorHoodSpace::new(mesh, surface, k, m, config)?;
    let system = assemble(&space, data)?;
    Ok((space, system))
}

/// `b_h*(u, q)`.
pub fn apply_b_star(system: &SaddleSystem, u: &[f64], q: &[f64]) -> Result<f64> {
    system.b_star.bilinear(q, u)
}

/// `b_h(u, q)`.
pub fn apply_b(system: &SaddleSystem, u: &[f64], q: &[f64]) -> Result<f64> {
    system.b.bilinear(q, u)
}

/// `A_h(u, v) = ⟨A u, v⟩`.
pub fn energy_product(system: &SaddleSystem, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    system.a.bilinear(v, u)
}

/// `|||v|||_k` of a discrete velocity.
pub fn energy_norm(system: &SaddleSystem, v: &[f64]) -> Result<f64> {
    Ok(system.energy.bilinear(v, v)?.max(0.0).sqrt())
}

/// `‖q‖_{L²(Γ_h^k)}` of a discrete pressure.
pub fn pressure_norm(system: &SaddleSystem, q: &[f64]) -> Result<f64> {
    Ok(system.m_p.bilinear(q, q)?.max(0.0).sqrt())
}
