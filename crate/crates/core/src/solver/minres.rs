use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{apply_saddle, project_pressure, saddle_residual, SolveResult, SpdFactor};
use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};

/// Velocity block `Q_A` of the block-diagonal preconditioner `diag(Q_A, M_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    /// Sparse Cholesky factorization of `A`.
    Exact,
    /// `diag(A)`.
    Diagonal,
}

#[derive(Debug, Clone, Copy)]
pub struct MinresOptions {
    pub preconditioner: PreconditionerKind,
    /// Relative tolerance on the preconditioned residual norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self { preconditioner: PreconditionerKind::Exact, tol: 1e-10, max_iter: 5000 }
    }
}

enum VelocityBlock {
    Exact(SpdFactor),
    Diagonal(Vec<f64>),
}

struct Preconditioner<'a> {
    system: &'a SaddleSystem,
    velocity: VelocityBlock,
    pressure: SpdFactor,
}

impl Preconditioner<'_> {
    /// `Q⁻¹ r`, with the pressure part shifted into `1^{⊥M}`.
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n_u = self.system.n_u();
        let mut z = match &self.velocity {
            VelocityBlock::Exact(f) => f.solve(&r[..n_u]),
            VelocityBlock::Diagonal(d) => r[..n_u].iter().zip(d).map(|(a, b)| a / b).collect(),
        };
        let mut zp = self.pressure.solve(&r[n_u..]);
        project_pressure(self.system, &mut zp);
        z.extend(zp);
        z
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned MINRES on the singular saddle-point system, iterating in
/// the subspace with pressures in `1^{⊥M}`.
pub fn solve_minres(system: &SaddleSystem, options: MinresOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let (n_u, n_p) = (system.n_u(), system.n_p());
    let n = n_u + n_p;
    let velocity = match options.preconditioner {
        PreconditionerKind::Exact => VelocityBlock::Exact(SpdFactor::new(&system.a, "A")?),
        PreconditionerKind::Diagonal => {
            let d = system.a.diagonal();
            if d.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::SingularSystem("diag(A) is not positive".into()));
            }
            VelocityBlock::Diagonal(d)
        }
    };
    let prec = Preconditioner { system, velocity, pressure: SpdFactor::new(&system.m_p, "M_p")? };
    let apply_k = |x: &[f64]| -> Result<Vec<f64>> {
        let (mut top, bottom) = apply_saddle(system, &x[..n_u], &x[n_u..])?;
        top.extend(bottom);
        Ok(top)
    };

    let mut x = vec![0.0; n];
    let b: Vec<f64> = system.rhs_f.iter().chain(&system.rhs_g).copied().collect();
    let mut v = b.clone();
    let mut z = prec.apply(&v);
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    let mut history = Vec::new();
    let finish = |x: Vec<f64>, iterations: usize, history: Vec<f64>| -> Result<SolveResult> {
        let u = x[..n_u].to_vec();
        let mut p = x[n_u..].to_vec();
        project_pressure(system, &mut p);
        let residual = saddle_residual(system, &u, &p)?;
        Ok(SolveResult { u, p, iterations, residual, wall_time: start.elapsed().as_secs_f64(), residual_history: history })
    };
    if gamma == 0.0 {
        return finish(x, 0, history);
    }
    let r0 = gamma;
    let mut eta = gamma;
    let (mut v_prev, mut w, mut w_prev) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut c, mut c_prev, mut s, mut s_prev) = (1.0, 1.0, 0.0, 0.0);
    history.push(1.0);
    for it in 1..=options.max_iter {
        v.iter_mut().for_each(|e| *e /= gamma);
        z.iter_mut().for_each(|e| *e /= gamma);
        let kz = apply_k(&z)?;
        let delta = dot(&kz, &z);
        let v_new: Vec<f64> = (0..n).map(|i| kz[i] - delta * v[i] - gamma * v_prev[i]).collect();
        let z_new = prec.apply(&v_new);
        let gamma_new = dot(&z_new, &v_new).max(0.0).sqrt();

        let alpha0 = c * delta - c_prev * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_prev * c * gamma;
        let alpha3 = s_prev * gamma;
        let (c_new, s_new) = (alpha0 / alpha1, gamma_new / alpha1);
        let w_new: Vec<f64> = (0..n).map(|i| (z[i] - alpha3 * w_prev[i] - alpha2 * w[i]) / alpha1).collect();
        for i in 0..n {
            x[i] += c_new * eta * w_new[i];
        }
        eta *= -s_new;
        let rel = eta.abs() / r0;
        history.push(rel);
        if rel <= options.tol || gamma_new == 0.0 {
            return finish(x, it, history);
        }
        v_prev = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma = gamma_new;
        w_prev = std::mem::replace(&mut w, w_new);
        c_prev = c;
        c = c_new;
        s_prev = s;
        s = s_new;
    }
    Err(Error::NoConvergence { iterations: options.max_iter, residual: eta.abs() / r0 })
}
