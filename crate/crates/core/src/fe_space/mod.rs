//! Lagrange bases, quadrature and DOF numbering for the Taylor-Hood pair.

pub mod basis;
pub mod dofmap;
pub mod quadrature;

use nalgebra::Vector3;

pub use basis::{ReferenceBasis, Tabulation, MAX_DEGREE};
pub use dofmap::{build_dofmap, DofMap, ScalarDofMap};
pub use quadrature::{quadrature, QuadratureRule};

use crate::lift::LiftedElement;

/// Value and surface gradient on `Γ_h^k` of a scalar FE function at `ξ` in element `t`.
pub fn eval_fe(
    coeffs: &[f64],
    dofs: &ScalarDofMap,
    t: usize,
    basis: &ReferenceBasis,
    elem: &LiftedElement,
    xi: [f64; 2],
) -> (f64, Vector3<f64>) {
    let geo = elem.geometry(xi);
    let (v, g, _) = basis.evaluate_owned(xi);
    let mut value = 0.0;
    let mut grad_ref = [0.0; 2];
    for (i, &d) in dofs.cell_dofs(t).iter().enumerate() {
        value += coeffs[d] * v[i];
        grad_ref[0] += coeffs[d] * g[i][0];
        grad_ref[1] += coeffs[d] * g[i][1];
    }
    (value, geo.surface_gradient(grad_ref))
}
