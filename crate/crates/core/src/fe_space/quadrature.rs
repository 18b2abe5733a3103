use fenris_quadrature::polyquad;

use crate::error::{Error, Result};

pub const MAX_EXACTNESS: usize = 20;

/// Symmetric positive-weight rule on the reference triangle (0,0), (1,0), (0,1).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    exactness: usize,
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Smallest available rule exact for polynomials of total degree `exactness`.
pub fn quadrature(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_EXACTNESS {
        return Err(Error::UnsupportedExactness(exactness));
    }
    let (weights, points) =
        polyquad::triangle(exactness.max(1)).map_err(|_| Error::UnsupportedExactness(exactness))?;
    // The source rules live on (-1,-1), (1,-1), (-1,1), four times the reference area.
    let points = points.iter().map(|p| [(p[0] + 1.0) / 2.0, (p[1] + 1.0) / 2.0]).collect();
    let weights = weights.iter().map(|w| w / 4.0).collect();
    Ok(QuadratureRule { points, weights, exactness })
}
