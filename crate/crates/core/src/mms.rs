//! Manufactured exact solutions of the surface Stokes problem on the sphere,
//! and error evaluation of discrete solutions against them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{StokesData, TaylorHoodSpace};
use crate::error::{Error, Result};
use crate::geometry::{AnalyticSurface, Point3, SurfaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MmsKind {
    /// Rigid rotation `e₃ × x`, a Killing field with zero strain.
    Killing,
    /// Projected ambient polynomial `P (x₂x₃, −x₁x₃, x₁² − x₂²)`.
    Polynomial,
}

impl fmt::Display for MmsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmsKind::Killing => "killing",
            MmsKind::Polynomial => "polynomial",
        })
    }
}

impl FromStr for MmsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "killing" => Ok(MmsKind::Killing),
            "polynomial" => Ok(MmsKind::Polynomial),
            other => Err(Error::config(format!("unknown manufactured solution '{other}'"))),
        }
    }
}

/// Exact velocity, pressure and data on a sphere of radius `R`.
///
/// Pointwise evaluators take points of the exact surface unless stated
/// otherwise. The pressure is `p = x₁x₂x₃` in both cases.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    kind: MmsKind,
    surface: AnalyticSurface,
    radius: f64,
}

pub fn killing_case(surface: &AnalyticSurface) -> Result<ManufacturedCase> {
    ManufacturedCase::new(MmsKind::Killing, surface)
}

pub fn polynomial_case(surface: &AnalyticSurface) -> Result<ManufacturedCase> {
    ManufacturedCase::new(MmsKind::Polynomial, surface)
}

/// `W` with `W x = e₃ × x`.
fn rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

fn projector(y: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - y * y.transpose()
}

/// Unit-sphere polynomial case. Every formula below is reduced modulo `|y| = 1`.
mod unit {
    use nalgebra::{Matrix3, Vector3};

    pub fn ambient(y: &Vector3<f64>) -> Vector3<f64> {
        let (y1, y2, y3) = (y.x, y.y, y.z);
        Vector3::new(y2 * y3, -y1 * y3, y1 * y1 - y2 * y2)
    }

    /// `∇(u∘π)` on the sphere; row `i` is the gradient of component `i`.
    pub fn gradient(y: &Vector3<f64>) -> Matrix3<f64> {
        let (y1, y2, y3) = (y.x, y.y, y.z);
        let (y1s, y2s) = (y1 * y1, y2 * y2);
        let (y1q, y2q) = (y1s * y1s, y2s * y2s);
        Matrix3::new(
            4.0 * y1q * y3 - 4.0 * y1s * y2s * y3 - 3.0 * y1s * y3 - 2.0 * y1 * y2 * y3 + y2s * y3,
            4.0 * y1s * y1 * y2 * y3 - 4.0 * y1 * y2s * y2 * y3 + 2.0 * y1 * y2 * y3 - 2.0 * y2s * y3 + y3,
            -4.0 * y1q * y1 + 3.0 * y1s * y1 + 2.0 * y1s * y2 + 4.0 * y1 * y2q - 3.0 * y1 * y2s + 2.0 * y2s * y2 - y2,
            4.0 * y1s * y1 * y2 * y3 + 2.0 * y1s * y3 - 4.0 * y1 * y2s * y2 * y3 - 2.0 * y1 * y2 * y3 - y3,
            4.0 * y1s * y2s * y3 - y1s * y3 + 2.0 * y1 * y2 * y3 - 4.0 * y2q * y3 + 3.0 * y2s * y3,
            -4.0 * y1q * y2 - 2.0 * y1s * y1 + 3.0 * y1s * y2 - 2.0 * y1 * y2s + y1 + 4.0 * y2q * y2 - 3.0 * y2s * y2,
            -4.0 * y1q * y1 + 4.0 * y1s * y1 + 4.0 * y1 * y2q,
            -4.0 * y1q * y2 + 4.0 * y2q * y2 - 4.0 * y2s * y2,
            -4.0 * y1q * y3 + 4.0 * y2q * y3,
        )
    }

    /// `−P div_Γ E(u)`.
    pub fn viscous(y: &Vector3<f64>) -> Vector3<f64> {
        let (y1, y2, y3) = (y.x, y.y, y.z);
        let (y1s, y2s) = (y1 * y1, y2 * y2);
        Vector3::new(
            -11.0 * y1s * y1 * y3 + 11.0 * y1 * y2s * y3 + 6.0 * y1 * y3 + 2.0 * y2 * y3,
            -11.0 * y1s * y2 * y3 - 2.0 * y1 * y3 + 11.0 * y2s * y2 * y3 - 6.0 * y2 * y3,
            11.0 * y1s * y1s - 6.0 * y1s - 11.0 * y2s * y2s + 6.0 * y2s,
        )
    }

    /// `div_Γ u`.
    pub fn divergence(y: &Vector3<f64>) -> f64 {
        4.0 * y.z * (y.y * y.y - y.x * y.x)
    }
}

impl ManufacturedCase {
    pub fn new(kind: MmsKind, surface: &AnalyticSurface) -> Result<Self> {
        match surface.kind() {
            SurfaceKind::Sphere { radius } => Ok(Self { kind, surface: *surface, radius }),
            SurfaceKind::Torus { .. } => {
                Err(Error::UnsupportedSurface(format!("no {kind} manufactured solution on the torus")))
            }
        }
    }

    pub fn kind(&self) -> MmsKind {
        self.kind
    }

    pub fn surface(&self) -> &AnalyticSurface {
        &self.surface
    }

    fn unit(&self, x: &Point3) -> Vector3<f64> {
        x / self.radius
    }

    /// Exact tangential velocity `u_T`.
    pub fn velocity(&self, x: &Point3) -> Vector3<f64> {
        match self.kind {
            MmsKind::Killing => rotation() * x,
            MmsKind::Polynomial => {
                let y = self.unit(x);
                projector(&y) * unit::ambient(&y) * self.radius.powi(2)
            }
        }
    }

    /// Gradient of the normal extension `u_T ∘ π` at a surface point.
    pub fn velocity_gradient(&self, x: &Point3) -> Matrix3<f64> {
        match self.kind {
            MmsKind::Killing => rotation() * projector(&self.unit(x)),
            MmsKind::Polynomial => unit::gradient(&self.unit(x)) * self.radius,
        }
    }

    /// `u_T(π(x))` for `x` in the tubular neighbourhood.
    pub fn velocity_extension(&self, x: &Point3) -> Result<Vector3<f64>> {
        Ok(self.velocity(&self.surface.closest_point(x)?))
    }

    /// `∇(u_T ∘ π)(x) = (∇_Γ u_T)(π(x)) (P − dH)(x)`.
    pub fn extension_gradient(&self, x: &Point3) -> Result<Matrix3<f64>> {
        let g = self.surface.geometric_data(x)?;
        Ok(self.velocity_gradient(&g.pi_x) * (g.p - g.h * g.d))
    }

    pub fn pressure(&self, x: &Point3) -> f64 {
        x.x * x.y * x.z
    }

    /// `∇_Γ p = P ∇p`.
    pub fn pressure_gradient(&self, x: &Point3) -> Vector3<f64> {
        projector(&self.unit(x)) * Vector3::new(x.y * x.z, x.x * x.z, x.x * x.y)
    }

    /// `f = −P div_Γ E(u_T) + u_T + ∇_Γ p`.
    pub fn forcing(&self, x: &Point3) -> Vector3<f64> {
        let base = self.velocity(x) + self.pressure_gradient(x);
        match self.kind {
            MmsKind::Killing => base,
            MmsKind::Polynomial => unit::viscous(&self.unit(x)) + base,
        }
    }

    /// `g = div_Γ u_T`.
    pub fn source(&self, x: &Point3) -> f64 {
        match self.kind {
            MmsKind::Killing => 0.0,
            MmsKind::Polynomial => unit::divergence(&self.unit(x)) * self.radius,
        }
    }
}

impl StokesData for ManufacturedCase {
    fn forcing(&self, x: &Point3) -> Vector3<f64> {
        ManufacturedCase::forcing(self, x)
    }

    fn source(&self, x: &Point3) -> f64 {
        ManufacturedCase::source(self, x)
    }
}

/// Errors of a discrete solution against a manufactured case, integrated over `Γ_h^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `|||u_T^e − u_h|||_k`.
    pub energy_error: f64,
    /// `min_c ‖p^e − p_h − c‖`.
    pub pressure_l2: f64,
    pub velocity_l2: f64,
    /// `‖P_h (∇u_T^e − ∇u_h) P_h‖`.
    pub tangential_h1: f64,
    pub level: usize,
    pub h: f64,
    pub n_u: usize,
    pub n_p: usize,
}

pub fn eval_errors(
    space: &TaylorHoodSpace,
    case: &ManufacturedCase,
    u: &[f64],
    p: &[f64],
    level: usize,
) -> Result<ErrorReport> {
    if u.len() != space.n_u() {
        return Err(Error::DimensionMismatch { expected: space.n_u(), found: u.len() });
    }
    if p.len() != space.n_p() {
        return Err(Error::DimensionMismatch { expected: space.n_p(), found: p.len() });
    }
    let h_inv2 = space.h().powi(-2);
    // [‖e‖², ‖∇e P_h‖², ‖n·e‖², ‖P_h ∇e P_h‖², ∫(p−p_h)², ∫(p−p_h), area]
    let parts: Vec<[f64; 7]> = (0..space.num_elements())
        .into_par_iter()
        .map(|t| -> Result<[f64; 7]> {
            let mut acc = [0.0; 7];
            for qp in space.quadrature_points(t) {
                let x = qp.geo.x;
                let g = space.surface().geometric_data(&x)?;
                let ph = qp.geo.projector();
                let (uh, grad_h) = space.eval_velocity(u, t, &qp);
                let (p_h, _) = space.eval_pressure(p, t, &qp);
                let e = case.velocity(&g.pi_x) - uh;
                let ge = case.velocity_gradient(&g.pi_x) * (g.p - g.h * g.d) * ph - grad_h;
                let pe = case.pressure(&g.pi_x) - p_h;
                let w = qp.weight;
                acc[0] += w * e.norm_squared();
                acc[1] += w * ge.norm_squared();
                acc[2] += w * g.n.dot(&e).powi(2);
                acc[3] += w * (ph * ge).norm_squared();
                acc[4] += w * pe * pe;
                acc[5] += w * pe;
                acc[6] += w;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut s = [0.0; 7];
    for part in &parts {
        for (a, b) in s.iter_mut().zip(part) {
            *a += b;
        }
    }
    let energy = s[0] + s[1] + h_inv2 * s[2];
    let pressure = s[4] - s[5] * s[5] / s[6];
    Ok(ErrorReport {
        energy_error: energy.max(0.0).sqrt(),
        pressure_l2: pressure.max(0.0).sqrt(),
        velocity_l2: s[0].sqrt(),
        tangential_h1: s[3].sqrt(),
        level,
        h: space.h(),
        n_u: space.n_u(),
        n_p: space.n_p(),
    })
}

/// `|||u_T^e|||_k` on `Γ_h^k`.
pub fn exact_energy_norm(space: &TaylorHoodSpace, case: &ManufacturedCase) -> Result<f64> {
    Ok(eval_errors(space, case, &vec![0.0; space.n_u()], &vec![0.0; space.n_p()], 0)?.energy_error)
}

/// Nodal interpolants `(u_I, p_I)` of the exact fields.
pub fn interpolate_case(space: &TaylorHoodSpace, case: &ManufacturedCase) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((space.interpolate_velocity(|x| case.velocity(x))?, space.interpolate_pressure(|x| case.pressure(x))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyConfig;
    use crate::mesh::build_base_mesh;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cases(radius: f64) -> Vec<ManufacturedCase> {
        let s = AnalyticSurface::sphere(radius).unwrap();
        vec![killing_case(&s).unwrap(), polynomial_case(&s).unwrap()]
    }

    fn random_points(radius: f64, n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| loop {
                let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let r = v.norm();
                if r > 0.1 && r <= 1.0 {
                    break v * (radius / r);
                }
            })
            .collect()
    }

    /// Richardson-extrapolated central difference of `f` along `e_j`.
    fn fd<F: Fn(&Point3) -> Vector3<f64>>(f: &F, x: &Point3, j: usize) -> Vector3<f64> {
        let step = 1e-4;
        let central = |s: f64| {
            let mut e = Vector3::zeros();
            e[j] = s;
            (f(&(x + e)) - f(&(x - e))) / (2.0 * s)
        };
        (central(step / 2.0) * 4.0 - central(step)) / 3.0
    }

    fn fd_gradient<F: Fn(&Point3) -> Vector3<f64>>(f: &F, x: &Point3) -> Matrix3<f64> {
        let mut g = Matrix3::zeros();
        for j in 0..3 {
            g.set_column(j, &fd(f, x, j));
        }
        g
    }

    fn strain(g: &Matrix3<f64>, p: &Matrix3<f64>) -> Matrix3<f64> {
        p * (g + g.transpose()) * p * 0.5
    }

    #[test]
    fn torus_is_unsupported() {
        let t = AnalyticSurface::torus(1.0, 0.4).unwrap();
        assert!(matches!(killing_case(&t), Err(Error::UnsupportedSurface(_))));
        assert!(matches!(polynomial_case(&t), Err(Error::UnsupportedSurface(_))));
    }

    #[test]
    fn killing_values_at_pole_of_x_axis() {
        let c = &cases(1.0)[0];
        let x = Point3::new(1.0, 0.0, 0.0);
        assert_eq!(c.velocity(&x), Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(c.pressure_gradient(&x), Vector3::zeros());
        assert_eq!(c.forcing(&x), Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(c.source(&x), 0.0);
    }

    #[test]
    fn fields_are_tangential() {
        for radius in [1.0, 2.5] {
            for c in cases(radius) {
                for x in random_points(radius, 100, 3) {
                    let n = x / radius;
                    let scale = radius.powi(2);
                    assert!(n.dot(&c.velocity(&x)).abs() <= 1e-12 * scale);
                    assert!(n.dot(&c.forcing(&x)).abs() <= 1e-10 * scale.max(1.0));
                    assert!(n.dot(&c.pressure_gradient(&x)).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for radius in [1.0, 1.7] {
            for c in cases(radius) {
                let ext = |y: &Point3| c.velocity_extension(y).unwrap();
                for x in random_points(radius, 100, 11) {
                    let g = c.velocity_gradient(&x);
                    let err = (g - fd_gradient(&ext, &x)).abs().max();
                    assert!(err <= 1e-6 * radius, "{:?} gradient error {err:e}", c.kind());
                    // off the surface the chain rule through π applies
                    let y = x * 1.05;
                    let err = (c.extension_gradient(&y).unwrap() - fd_gradient(&ext, &y)).abs().max();
                    assert!(err <= 1e-6 * radius, "{:?} extension gradient error {err:e}", c.kind());
                }
            }
        }
    }

    #[test]
    fn source_matches_divergence_oracle() {
        for radius in [1.0, 1.7] {
            for c in cases(radius) {
                let ext = |y: &Point3| c.velocity_extension(y).unwrap();
                for x in random_points(radius, 100, 5) {
                    let div = fd_gradient(&ext, &x).trace();
                    assert!((div - c.source(&x)).abs() <= 1e-6, "{:?}: {div} vs {}", c.kind(), c.source(&x));
                }
            }
        }
    }

    #[test]
    fn killing_field_has_zero_strain() {
        let c = cases(1.0)[0];
        let ext = |y: &Point3| c.velocity_extension(y).unwrap();
        for x in random_points(1.0, 100, 7) {
            let p = projector(&x);
            assert!(strain(&fd_gradient(&ext, &x), &p).abs().max() <= 1e-6);
        }
    }

    /// `−P div_Γ E` by differencing the closed-form strain extended along normals.
    #[test]
    fn forcing_matches_strain_divergence_oracle() {
        for radius in [1.0, 1.7] {
            for c in cases(radius) {
                let strain_ext = |y: &Point3, i: usize| -> Vector3<f64> {
                    let x = c.surface().closest_point(y).unwrap();
                    strain(&c.velocity_gradient(&x), &projector(&(x / radius))).row(i).transpose()
                };
                for x in random_points(radius, 100, 9) {
                    let mut div = Vector3::zeros();
                    for i in 0..3 {
                        let row = |y: &Point3| strain_ext(y, i);
                        div[i] = (0..3).map(|j| fd(&row, &x, j)[j]).sum();
                    }
                    let visc = -projector(&(x / radius)) * div;
                    let expected = c.velocity(&x) + c.pressure_gradient(&x) + visc;
                    let err = (expected - c.forcing(&x)).abs().max();
                    assert!(err <= 1e-6, "{:?} forcing error {err:e}", c.kind());
                }
            }
        }
    }

    fn space(level: usize, k: usize, m: usize) -> TaylorHoodSpace {
        let s = AnalyticSurface::sphere(1.0).unwrap();
        let mesh = build_base_mesh(&s).unwrap().refine_to(&s, level).unwrap();
        TaylorHoodSpace::new(&mesh, &s, k, m, AssemblyConfig::default()).unwrap()
    }

    #[test]
    fn pressure_and_source_have_zero_mean() {
        let sp = space(2, 3, 3);
        for c in cases(1.0) {
            let ip = sp.integrate(|_, qp| Ok(c.pressure(&sp.surface().closest_point(&qp.geo.x)?))).unwrap();
            let ig = sp.integrate(|_, qp| Ok(c.source(&sp.surface().closest_point(&qp.geo.x)?))).unwrap();
            assert!(ip.abs() <= 1e-10 && ig.abs() <= 1e-10, "{ip:e} {ig:e}");
        }
    }

    #[test]
    fn zero_solution_reports_exact_norms() {
        let sp = space(1, 2, 2);
        let c = cases(1.0)[0];
        let r = eval_errors(&sp, &c, &vec![0.0; sp.n_u()], &vec![0.0; sp.n_p()], 1).unwrap();
        // ‖e₃ × x‖² = ∫ (1 − x₃²) = 8π/3 and ∇_Γ u has squared norm 1 on the unit sphere
        let l2 = (8.0 * std::f64::consts::PI / 3.0).sqrt();
        assert!((r.velocity_l2 - l2).abs() < 1e-2 * l2, "{} vs {l2}", r.velocity_l2);
        assert!(r.energy_error > r.velocity_l2);
        assert_eq!(r.energy_error, exact_energy_norm(&sp, &c).unwrap());
        assert!(matches!(eval_errors(&sp, &c, &[0.0], &[], 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn interpolation_error_decays_at_least_at_order_two() {
        for c in cases(1.0) {
            let errs: Vec<(f64, f64)> = (1..=3)
                .map(|l| {
                    let sp = space(l, 2, 2);
                    let (u, p) = interpolate_case(&sp, &c).unwrap();
                    let r = eval_errors(&sp, &c, &u, &p, l).unwrap();
                    (r.h, r.energy_error)
                })
                .collect();
            let eoc = (errs[1].1 / errs[2].1).ln() / (errs[1].0 / errs[2].0).ln();
            assert!(eoc > 1.7, "{:?}: {eoc}", c.kind());
        }
    }
}
