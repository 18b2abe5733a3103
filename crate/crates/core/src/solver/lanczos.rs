use faer::{Mat, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Relative Ritz residual required for a converged extreme eigenvalue.
    pub tol: f64,
    pub max_iter: usize,
    /// Require convergence of the smallest / largest eigenvalue.
    pub want_min: bool,
    pub want_max: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 600, want_min: true, want_max: true }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extreme eigenvalues of `K x = λ M x` by Lanczos in the `M` inner product
/// with full reorthogonalization. `deflate` lists `M`-orthonormal vectors
/// (with their `M` images) whose span is excluded.
pub fn lanczos_extremes(
    n: usize,
    apply_k: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_m: &dyn Fn(&[f64]) -> Vec<f64>,
    solve_m: &dyn Fn(&[f64]) -> Vec<f64>,
    deflate: &[(Vec<f64>, Vec<f64>)],
    options: LanczosOptions,
) -> Result<(f64, f64)> {
    let project = |w: &mut Vec<f64>, basis: &[(Vec<f64>, Vec<f64>)]| {
        for (q, mq) in basis {
            let coef = dot(w, mq);
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= coef * b);
        }
    };
    // Deterministic, equidistributed start vector.
    let mut q: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_7).fract() - 0.5).collect();
    project(&mut q, deflate);
    let mut mq = apply_m(&q);
    let norm = dot(&q, &mq).sqrt();
    if !(norm > 0.0) {
        return Err(Error::EigenFailure("start vector lies in the deflated space".into()));
    }
    q.iter_mut().for_each(|v| *v /= norm);
    mq.iter_mut().for_each(|v| *v /= norm);

    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let (mut alphas, mut betas): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let max_iter = options.max_iter.min(n.saturating_sub(deflate.len())).max(1);
    let mut last = (f64::NAN, f64::NAN);
    for j in 0..max_iter {
        let kq = apply_k(&q);
        let alpha = dot(&kq, &q);
        let mut w = solve_m(&kq);
        basis.push((q, mq));
        alphas.push(alpha);
        for _ in 0..2 {
            project(&mut w, &basis);
            project(&mut w, deflate);
        }
        let mw = apply_m(&w);
        let beta = dot(&w, &mw).max(0.0).sqrt();

        let m = alphas.len();
        let t = Mat::from_fn(m, m, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c || c + 1 == r {
                betas[r.min(c)]
            } else {
                0.0
            }
        });
        let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let (lo, hi) = (s[0], s[m - 1]);
        let res_lo = (beta * u[(m - 1, 0)]).abs();
        let res_hi = (beta * u[(m - 1, m - 1)]).abs();
        last = (lo, hi);
        let scale = lo.abs().max(hi.abs());
        let ok_lo = !options.want_min || res_lo <= options.tol * scale;
        let ok_hi = !options.want_max || res_hi <= options.tol * scale;
        if (ok_lo && ok_hi) || beta <= 1e-14 * scale || (j + 1 == max_iter && basis.len() + deflate.len() >= n) {
            return Ok(last);
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
        mq = mw.iter().map(|v| v / beta).collect();
    }
    Err(Error::EigenFailure(format!(
        "Lanczos did not converge in {max_iter} iterations (last estimates {:e}, {:e})",
        last.0, last.1
    )))
}
