use faer::{Mat, Side};

use super::lanczos::{lanczos_extremes, LanczosOptions};
use super::{SpdFactor, SpectrumEstimate, SpectrumMethod};
use crate::assembly::{CsrMatrix, SaddleSystem};
use crate::error::{Error, Result};

/// Largest pressure dimension for which the Schur complement is formed densely.
pub const DENSE_SCHUR_LIMIT: usize = 4000;
/// Largest dimension for dense eigenvalues of velocity-sized pencils.
pub const DENSE_A_LIMIT: usize = 3000;

fn eig_err(e: impl std::fmt::Debug) -> Error {
    Error::EigenFailure(format!("{e:?}"))
}

/// Extreme eigenvalues of the pencil `(K, M)` with `M` positive definite.
/// With `kernel = Some(d)` where `K d = 0`, the eigenvalue belonging to `d` is
/// excluded.
pub fn dense_generalized_extremes(k: &Mat<f64>, m: &Mat<f64>, kernel: Option<&[f64]>) -> Result<(f64, f64)> {
    let n = k.nrows();
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(eig_err)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    if (0..n).any(|i| !(s[i] > 0.0)) {
        return Err(Error::EigenFailure("mass matrix is not positive definite".into()));
    }
    // W = M^{-1/2}
    let scaled = Mat::from_fn(n, n, |r, i| u[(r, i)] / s[i].sqrt());
    let w = &scaled * u.transpose();
    let c = &w * k * &w;
    let mut c = Mat::from_fn(n, n, |r, cc| 0.5 * (c[(r, cc)] + c[(cc, r)]));
    if let Some(d) = kernel {
        // z = M^{1/2} d spans the kernel of W K W.
        let dv = Mat::from_fn(n, 1, |r, _| d[r]);
        let ud = u.transpose() * &dv;
        let ud = Mat::from_fn(n, 1, |i, _| ud[(i, 0)] * s[i].sqrt());
        let zm = u * &ud;
        let nz = zm.norm_l2();
        let z: Vec<f64> = (0..n).map(|r| zm[(r, 0)] / nz).collect();
        let tau = 2.0 * (c.norm_l2() + 1.0);
        for cc in 0..n {
            for r in 0..n {
                c[(r, cc)] += tau * z[r] * z[cc];
            }
        }
    }
    let ev = c.self_adjoint_eigenvalues(Side::Lower).map_err(eig_err)?;
    let top = if kernel.is_some() { n - 2 } else { n - 1 };
    Ok((ev[0], ev[top]))
}

fn estimate(min: f64, max: f64, method: SpectrumMethod) -> Result<SpectrumEstimate> {
    if !(min > 0.0 && max >= min && max.is_finite()) {
        return Err(Error::EigenFailure(format!("invalid spectrum estimate [{min:e}, {max:e}]")));
    }
    Ok(SpectrumEstimate { min, max, method })
}

/// Extreme generalized eigenvalues of `(S, M_p)` on `1^{⊥M}`, `S = B A⁻¹ Bᵀ`.
pub fn schur_spectrum(system: &SaddleSystem) -> Result<SpectrumEstimate> {
    let method = if system.n_p() <= DENSE_SCHUR_LIMIT { SpectrumMethod::Dense } else { SpectrumMethod::Iterative };
    schur_spectrum_with(system, method)
}

pub fn schur_spectrum_with(system: &SaddleSystem, method: SpectrumMethod) -> Result<SpectrumEstimate> {
    let n_p = system.n_p();
    let a = SpdFactor::new(&system.a, "A")?;
    let ones = vec![1.0; n_p];
    if method == SpectrumMethod::Dense {
        let x = a.solve_mat(&system.b.transpose().to_dense());
        let s = system.b.to_faer() * &x;
        let (lo, hi) = dense_generalized_extremes(&s, &system.m_p.to_dense(), Some(&ones))?;
        return estimate(lo, hi, SpectrumMethod::Dense);
    }
    let mp = SpdFactor::new(&system.m_p, "M_p")?;
    let total: f64 = system.mean_vec.iter().sum();
    let d: Vec<f64> = ones.iter().map(|v| v / total.sqrt()).collect();
    let md: Vec<f64> = system.mean_vec.iter().map(|v| v / total.sqrt()).collect();
    let apply_s = |v: &[f64]| -> Vec<f64> {
        let btv = system.b.tr_mul_vec(v).expect("dimensions match");
        system.b.mul_vec(&a.solve(&btv)).expect("dimensions match")
    };
    let apply_m = |v: &[f64]| system.m_p.mul_vec(v).expect("dimensions match");
    let solve_m = |v: &[f64]| mp.solve(v);
    let (lo, hi) = lanczos_extremes(n_p, &apply_s, &apply_m, &solve_m, &[(d, md)], LanczosOptions::default())?;
    estimate(lo, hi, SpectrumMethod::Iterative)
}

/// Extreme generalized eigenvalues of `(A, M_u)`.
pub fn a_condition(system: &SaddleSystem) -> Result<SpectrumEstimate> {
    pencil_extremes(&system.a, &system.m_u, auto_method(system.n_u()))
}

pub fn a_condition_with(system: &SaddleSystem, method: SpectrumMethod) -> Result<SpectrumEstimate> {
    pencil_extremes(&system.a, &system.m_u, method)
}

/// Extreme eigenvalues of a mass matrix.
pub fn mass_condition(m: &CsrMatrix) -> Result<SpectrumEstimate> {
    pencil_extremes(m, &CsrMatrix::identity(m.nrows()), auto_method(m.nrows()))
}

fn auto_method(n: usize) -> SpectrumMethod {
    if n <= DENSE_A_LIMIT {
        SpectrumMethod::Dense
    } else {
        SpectrumMethod::Iterative
    }
}

fn pencil_extremes(k: &CsrMatrix, m: &CsrMatrix, method: SpectrumMethod) -> Result<SpectrumEstimate> {
    let n = k.nrows();
    if method == SpectrumMethod::Dense {
        let (lo, hi) = dense_generalized_extremes(&k.to_dense(), &m.to_dense(), None)?;
        return estimate(lo, hi, SpectrumMethod::Dense);
    }
    let kf = SpdFactor::new(k, "stiffness block")?;
    let mf = SpdFactor::new(m, "mass block")?;
    let apply_k = |v: &[f64]| k.mul_vec(v).expect("dimensions match");
    let apply_m = |v: &[f64]| m.mul_vec(v).expect("dimensions match");
    let solve_k = |v: &[f64]| kf.solve(v);
    let solve_m = |v: &[f64]| mf.solve(v);
    let only_max = LanczosOptions { want_min: false, ..LanczosOptions::default() };
    let (_, hi) = lanczos_extremes(n, &apply_k, &apply_m, &solve_m, &[], only_max)?;
    // Shift-invert: the largest eigenvalue of (M, K) is 1/λ_min of (K, M).
    let (_, inv) = lanczos_extremes(n, &apply_m, &apply_k, &solve_k, &[], only_max)?;
    estimate(1.0 / inv, hi, SpectrumMethod::Iterative)
}
