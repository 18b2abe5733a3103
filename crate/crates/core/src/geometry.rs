//! Closed-form differential geometry of the supported smooth surfaces.
//!
//! Every surface here is described through its signed distance function `d`
//! (negative inside). The unit normal is `n = ∇d`, the Weingarten map is
//! `H = ∇²d`, and the closest-point projection is `π(x) = x − d(x) n(x)`.
//! All quantities are evaluated in closed form, so no iterative projection is
//! ever needed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Relative distance to the medial axis below which the closed forms are
/// rejected.
const MEDIAL_AXIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceKind {
    Sphere { radius: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSurface {
    kind: SurfaceKind,
    tubular_width: f64,
}

/// Pointwise geometric quantities at an ambient point near the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricData {
    pub d: f64,
    pub n: Vector3<f64>,
    pub h: Matrix3<f64>,
    pub p: Matrix3<f64>,
    pub pi_x: Point3,
}

impl AnalyticSurface {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Self { kind: SurfaceKind::Sphere { radius }, tubular_width: 0.5 * radius })
    }

    pub fn torus(major_radius: f64, minor_radius: f64) -> Result<Self> {
        if !(minor_radius > 0.0 && major_radius > minor_radius && major_radius.is_finite()) {
            return Err(Error::config(format!(
                "torus radii must satisfy major > minor > 0, got ({major_radius}, {minor_radius})"
            )));
        }
        Ok(Self {
            kind: SurfaceKind::Torus { major_radius, minor_radius },
            tubular_width: 0.5 * minor_radius,
        })
    }

    pub fn from_kind(kind: SurfaceKind) -> Result<Self> {
        match kind {
            SurfaceKind::Sphere { radius } => Self::sphere(radius),
            SurfaceKind::Torus { major_radius, minor_radius } => Self::torus(major_radius, minor_radius),
        }
    }

    /// Overrides the tubular width δ. It may not exceed the reach of the surface.
    pub fn with_tubular_width(mut self, width: f64) -> Result<Self> {
        let reach = match self.kind {
            SurfaceKind::Sphere { radius } => radius,
            SurfaceKind::Torus { minor_radius, .. } => minor_radius,
        };
        if !(width > 0.0 && width < reach) {
            return Err(Error::config(format!("tubular width must lie in (0, {reach}), got {width}")));
        }
        self.tubular_width = width;
        Ok(self)
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn tubular_width(&self) -> f64 {
        self.tubular_width
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            SurfaceKind::Sphere { radius } => 2.0 * radius,
            SurfaceKind::Torus { major_radius, minor_radius } => 2.0 * (major_radius + minor_radius),
        }
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match self.kind {
            SurfaceKind::Sphere { radius } => 4.0 * PI * radius * radius,
            SurfaceKind::Torus { major_radius, minor_radius } => 4.0 * PI * PI * major_radius * minor_radius,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, SurfaceKind::Sphere { .. })
    }

    /// True when `|d(x)| < δ`, i.e. `x` lies in the tubular neighborhood `U_δ`.
    pub fn in_tubular_neighborhood(&self, x: &Point3) -> bool {
        self.signed_distance(x).map(|d| d.abs() < self.tubular_width).unwrap_or(false)
    }

    pub fn signed_distance(&self, x: &Point3) -> Result<f64> {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                let r = self.sphere_radius_at(x, radius)?;
                Ok(r - radius)
            }
            SurfaceKind::Torus { major_radius, minor_radius } => {
                let (_, q, _) = self.torus_coords(x, major_radius, minor_radius)?;
                Ok(q - minor_radius)
            }
        }
    }

    /// Constant normal extension `n(π(x))`, which coincides with `∇d(x)`.
    pub fn normal(&self, x: &Point3) -> Result<Vector3<f64>> {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                let r = self.sphere_radius_at(x, radius)?;
                Ok(x / r)
            }
            SurfaceKind::Torus { major_radius, minor_radius } => {
                let (rho, q, _) = self.torus_coords(x, major_radius, minor_radius)?;
                let e_rho = Vector3::new(x.x / rho, x.y / rho, 0.0);
                Ok(e_rho * ((rho - major_radius) / q) + Vector3::z() * (x.z / q))
            }
        }
    }

    pub fn closest_point(&self, x: &Point3) -> Result<Point3> {
        let d = self.signed_distance(x)?;
        let n = self.normal(x)?;
        Ok(x - n * d)
    }

    pub fn geometric_data(&self, x: &Point3) -> Result<GeometricData> {
        let (d, n, h) = match self.kind {
            SurfaceKind::Sphere { radius } => {
                let r = self.sphere_radius_at(x, radius)?;
                let n = x / r;
                let h = (Matrix3::identity() - n * n.transpose()) / r;
                (r - radius, n, h)
            }
            SurfaceKind::Torus { major_radius, minor_radius } => {
                let (rho, q, _) = self.torus_coords(x, major_radius, minor_radius)?;
                let e_rho = Vector3::new(x.x / rho, x.y / rho, 0.0);
                let e_phi = Vector3::new(-x.y / rho, x.x / rho, 0.0);
                let n_rho = (rho - major_radius) / q;
                let n_z = x.z / q;
                let n = e_rho * n_rho + Vector3::z() * n_z;
                // in-plane tangent of the tube cross-section
                let t = e_rho * n_z - Vector3::z() * n_rho;
                let h = t * t.transpose() / q + e_phi * e_phi.transpose() * ((rho - major_radius) / (q * rho));
                (q - minor_radius, n, h)
            }
        };
        let p = Matrix3::identity() - n * n.transpose();
        Ok(GeometricData { d, n, h, p, pi_x: x - n * d })
    }

    fn sphere_radius_at(&self, x: &Point3, radius: f64) -> Result<f64> {
        let r = x.norm();
        if !(r > MEDIAL_AXIS_TOL * radius) || !r.is_finite() {
            return Err(Error::OutOfTubularNeighborhood {
                point: [x.x, x.y, x.z],
                reason: "sphere center has no unique closest point".into(),
            });
        }
        Ok(r)
    }

    /// Returns `(ρ, q, ρ − R)` with `ρ` the distance to the symmetry axis and
    /// `q` the distance to the tube's center circle.
    fn torus_coords(&self, x: &Point3, major: f64, minor: f64) -> Result<(f64, f64, f64)> {
        let rho = x.x.hypot(x.y);
        if !(rho > MEDIAL_AXIS_TOL * major) || !rho.is_finite() {
            return Err(Error::OutOfTubularNeighborhood {
                point: [x.x, x.y, x.z],
                reason: "torus axis has no unique closest point".into(),
            });
        }
        let q = (rho - major).hypot(x.z);
        if !(q > MEDIAL_AXIS_TOL * minor) {
            return Err(Error::OutOfTubularNeighborhood {
                point: [x.x, x.y, x.z],
                reason: "torus center circle has no unique closest point".into(),
            });
        }
        Ok((rho, q, rho - major))
    }
}
