use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::{project_pressure, saddle_residual, SolveResult};
use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};

/// Systems up to this size fall back to a dense LU when the sparse one fails.
pub const DENSE_FALLBACK_LIMIT: usize = 5000;

/// Residual above which a factorization is deemed to have hit a singularity
/// beyond the constant-pressure kernel.
const SINGULAR_RESIDUAL: f64 = 1e-6;

/// Solves `[[A, Bᵀ, 0], [B, 0, M_p 1], [0, (M_p 1)ᵀ, 0]] (u, p, λ) = (f, g, 0)`.
pub fn solve_direct(system: &SaddleSystem) -> Result<SolveResult> {
    let start = Instant::now();
    let (n_u, n_p) = (system.n_u(), system.n_p());
    let n = n_u + n_p + 1;
    let mut trip = Vec::with_capacity(system.a.nnz() + 2 * system.b.nnz() + 2 * n_p);
    for (r, c, v) in system.a.triplets() {
        trip.push(Triplet::new(r, c, v));
    }
    for (r, c, v) in system.b.triplets() {
        trip.push(Triplet::new(n_u + r, c, v));
        trip.push(Triplet::new(c, n_u + r, v));
    }
    for (i, &v) in system.mean_vec.iter().enumerate() {
        trip.push(Triplet::new(n_u + i, n - 1, v));
        trip.push(Triplet::new(n - 1, n_u + i, v));
    }
    let rhs = Mat::from_fn(n, 1, |i, _| {
        if i < n_u {
            system.rhs_f[i]
        } else if i < n_u + n_p {
            system.rhs_g[i - n_u]
        } else {
            0.0
        }
    });
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("cannot build augmented matrix: {e:?}")))?;

    let unpack = |x: &Mat<f64>| -> (Vec<f64>, Vec<f64>) {
        ((0..n_u).map(|i| x[(i, 0)]).collect(), (0..n_p).map(|i| x[(n_u + i, 0)]).collect())
    };
    let finish = |x: Mat<f64>| -> Result<SolveResult> {
        let (u, mut p) = unpack(&x);
        if u.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("factorization produced non-finite values".into()));
        }
        project_pressure(system, &mut p);
        let residual = saddle_residual(system, &u, &p)?;
        if residual > SINGULAR_RESIDUAL {
            return Err(Error::SingularSystem(format!("residual {residual:e} after factorization")));
        }
        Ok(SolveResult { u, p, iterations: 0, residual, wall_time: start.elapsed().as_secs_f64(), residual_history: Vec::new() })
    };

    let sparse = k.sp_lu().map_err(|e| Error::SingularSystem(format!("{e:?}"))).and_then(|lu| finish(lu.solve(&rhs)));
    match sparse {
        Ok(r) => Ok(r),
        Err(e) if n <= DENSE_FALLBACK_LIMIT => {
            let dense = k.to_dense();
            finish(dense.partial_piv_lu().solve(&rhs)).map_err(|_| e)
        }
        Err(e) => Err(e),
    }
}
