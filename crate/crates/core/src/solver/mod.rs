//! Direct and preconditioned iterative solution of the saddle-point system,
//! and spectral estimates of its blocks.

mod direct;
mod lanczos;
mod minres;
mod spectrum;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::assembly::{CsrMatrix, SaddleSystem};
use crate::error::{Error, Result};

pub use direct::solve_direct;
pub use lanczos::{lanczos_extremes, LanczosOptions};
pub use minres::{solve_minres, MinresOptions, PreconditionerKind};
pub use spectrum::{
    a_condition, a_condition_with, dense_generalized_extremes, mass_condition, schur_spectrum, schur_spectrum_with,
    DENSE_A_LIMIT, DENSE_SCHUR_LIMIT,
};

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Zero for the direct solver.
    pub iterations: usize,
    /// `‖b − 𝒜x‖ / ‖b‖` of the unconstrained saddle-point system (0 for b = 0).
    pub residual: f64,
    pub wall_time: f64,
    /// Preconditioned residual norms per iteration (empty for the direct solver).
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub min: f64,
    pub max: f64,
    pub method: SpectrumMethod,
}

impl SpectrumEstimate {
    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }
}

/// Sparse Cholesky factor of a symmetric positive definite matrix.
pub struct SpdFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(m: &CsrMatrix, what: &str) -> Result<Self> {
        let llt = m
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("Cholesky of {what} failed: {e:?}")))?;
        Ok(Self { llt, n: m.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.llt.solve(b)
    }
}

/// Applies `𝒜 = [[A, Bᵀ], [B, 0]]`.
pub fn apply_saddle(system: &SaddleSystem, u: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut top = system.a.mul_vec(u)?;
    for (t, bt) in top.iter_mut().zip(system.b.tr_mul_vec(p)?) {
        *t += bt;
    }
    Ok((top, system.b.mul_vec(u)?))
}

/// Relative residual `‖b − 𝒜x‖ / ‖b‖` (absolute when `b = 0`).
pub fn saddle_residual(system: &SaddleSystem, u: &[f64], p: &[f64]) -> Result<f64> {
    let (ru, rp) = apply_saddle(system, u, p)?;
    let num: f64 = ru.iter().zip(&system.rhs_f).chain(rp.iter().zip(&system.rhs_g)).map(|(a, b)| (b - a).powi(2)).sum();
    let den: f64 = system.rhs_f.iter().chain(&system.rhs_g).map(|v| v * v).sum();
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// `⟨M_p p, 1⟩ / (‖M_p 1‖ ‖p‖)`, zero when `p` is M-orthogonal to constants.
pub fn pressure_mean_defect(system: &SaddleSystem, p: &[f64]) -> f64 {
    let dot: f64 = system.mean_vec.iter().zip(p).map(|(a, b)| a * b).sum();
    let na = system.mean_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if np == 0.0 {
        0.0
    } else {
        dot.abs() / (na * np)
    }
}

/// Shifts `p` by a constant so that `⟨M_p p, 1⟩ = 0`.
pub fn project_pressure(system: &SaddleSystem, p: &mut [f64]) {
    let total: f64 = system.mean_vec.iter().sum();
    let shift = system.mean_vec.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>() / total;
    p.iter_mut().for_each(|v| *v -= shift);
}
