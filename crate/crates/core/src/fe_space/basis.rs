use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 4;

/// Equispaced Lagrange basis of degree `m` on the reference triangle
/// (0,0), (1,0), (0,1), in product form over barycentric coordinates.
///
/// Node order: vertices, then the interior nodes of edges v0→v1, v1→v2, v2→v0
/// (each walked from its first vertex), then face-interior nodes row by row.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    /// Integer barycentric indices `(i₀, i₁, i₂)` with sum `m` of every node.
    multi_indices: Vec<[usize; 3]>,
}

/// Basis values, reference gradients and reference Hessians `[xx, xy, yy]`
/// at every point of a quadrature rule, stored point-major.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_basis: usize,
    pub n_points: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

impl Tabulation {
    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn gradients_at(&self, q: usize) -> &[[f64; 2]] {
        &self.gradients[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn hessians_at(&self, q: usize) -> &[[f64; 3]] {
        &self.hessians[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

pub fn num_nodes(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Reference coordinates of the equispaced degree-`p` nodes in canonical order.
pub fn lagrange_nodes(p: usize) -> Vec<[f64; 2]> {
    if p == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let pf = p as f64;
    let mut nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for s in 1..p {
        nodes.push([s as f64 / pf, 0.0]);
    }
    for s in 1..p {
        nodes.push([(p - s) as f64 / pf, s as f64 / pf]);
    }
    for s in 1..p {
        nodes.push([0.0, (p - s) as f64 / pf]);
    }
    for j in 1..p {
        for i in 1..p - j {
            nodes.push([i as f64 / pf, j as f64 / pf]);
        }
    }
    nodes
}

/// Value and first two derivatives of `∏_{a<n} (pλ − a)/(n − a)`.
fn univariate(p: usize, n: usize, lambda: f64) -> [f64; 3] {
    let (mut v, mut d, mut dd) = (1.0, 0.0, 0.0);
    let pf = p as f64;
    for a in 0..n {
        let denom = (n - a) as f64;
        let f = (pf * lambda - a as f64) / denom;
        let df = pf / denom;
        dd = dd * f + 2.0 * d * df;
        d = d * f + v * df;
        v *= f;
    }
    [v, d, dd]
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        let nodes = lagrange_nodes(degree);
        let pf = degree as f64;
        let multi_indices = nodes
            .iter()
            .map(|&[x, y]| {
                let (i1, i2) = ((x * pf).round() as usize, (y * pf).round() as usize);
                [degree - i1 - i2, i1, i2]
            })
            .collect();
        Ok(Self { degree, nodes, multi_indices })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Barycentric coordinates of node `i`.
    pub fn node_barycentric(&self, i: usize) -> [f64; 3] {
        let [x, y] = self.nodes[i];
        [1.0 - x - y, x, y]
    }

    /// Evaluates values, gradients and Hessians of all basis functions at `xi`.
    pub fn evaluate(&self, xi: [f64; 2], values: &mut [f64], gradients: &mut [[f64; 2]], hessians: &mut [[f64; 3]]) {
        let p = self.degree;
        let lambda = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        for (j, idx) in self.multi_indices.iter().enumerate() {
            let [a, a1, a2] = univariate(p, idx[0], lambda[0]);
            let [b, b1, b2] = univariate(p, idx[1], lambda[1]);
            let [c, c1, c2] = univariate(p, idx[2], lambda[2]);
            values[j] = a * b * c;
            gradients[j] = [-a1 * b * c + a * b1 * c, -a1 * b * c + a * b * c1];
            hessians[j] = [
                a2 * b * c - 2.0 * a1 * b1 * c + a * b2 * c,
                a2 * b * c - a1 * b * c1 - a1 * b1 * c + a * b1 * c1,
                a2 * b * c - 2.0 * a1 * b * c1 + a * b * c2,
            ];
        }
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        self.evaluate_owned(xi).0
    }

    pub fn gradients(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        self.evaluate_owned(xi).1
    }

    pub fn hessians(&self, xi: [f64; 2]) -> Vec<[f64; 3]> {
        self.evaluate_owned(xi).2
    }

    pub fn evaluate_owned(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 3]>) {
        let n = self.len();
        let (mut v, mut g, mut h) = (vec![0.0; n], vec![[0.0; 2]; n], vec![[0.0; 3]; n]);
        self.evaluate(xi, &mut v, &mut g, &mut h);
        (v, g, h)
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        let n = self.len();
        let nq = rule.len();
        let mut tab = Tabulation {
            n_basis: n,
            n_points: nq,
            values: vec![0.0; n * nq],
            gradients: vec![[0.0; 2]; n * nq],
            hessians: vec![[0.0; 3]; n * nq],
        };
        for (q, &xi) in rule.points().iter().enumerate() {
            let r = q * n..(q + 1) * n;
            self.evaluate(
                xi,
                &mut tab.values[r.clone()],
                &mut tab.gradients[r.clone()],
                &mut tab.hessians[r],
            );
        }
        tab
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn node_counts() {
        assert_eq!(ReferenceBasis::new(1).unwrap().len(), 3);
        assert_eq!(ReferenceBasis::new(2).unwrap().len(), 6);
        assert_eq!(ReferenceBasis::new(3).unwrap().len(), 10);
        assert_eq!(ReferenceBasis::new(4).unwrap().len(), 15);
        assert!(matches!(ReferenceBasis::new(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(ReferenceBasis::new(5), Err(Error::UnsupportedDegree(5))));
    }

    #[test]
    fn quadratic_nodes_are_vertices_then_midpoints() {
        let b = ReferenceBasis::new(2).unwrap();
        assert_eq!(b.nodes(), &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
    }

    #[test]
    fn linear_basis_at_barycenter() {
        let b = ReferenceBasis::new(1).unwrap();
        for v in b.values([1.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn kronecker_property() {
        for m in 1..=MAX_DEGREE {
            let b = ReferenceBasis::new(m).unwrap();
            for (i, &node) in b.nodes().iter().enumerate() {
                for (j, v) in b.values(node).into_iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-5;
        let xi = [0.21, 0.37];
        for m in 1..=MAX_DEGREE {
            let b = ReferenceBasis::new(m).unwrap();
            let (_, g, h) = b.evaluate_owned(xi);
            let gp = |dx: f64, dy: f64| b.gradients([xi[0] + dx, xi[1] + dy]);
            let vp = |dx: f64, dy: f64| b.values([xi[0] + dx, xi[1] + dy]);
            let (gx1, gx0, gy1, gy0) = (gp(eps, 0.0), gp(-eps, 0.0), gp(0.0, eps), gp(0.0, -eps));
            let (vx1, vx0, vy1, vy0) = (vp(eps, 0.0), vp(-eps, 0.0), vp(0.0, eps), vp(0.0, -eps));
            for j in 0..b.len() {
                assert_abs_diff_eq!(g[j][0], (vx1[j] - vx0[j]) / (2.0 * eps), epsilon = 1e-7);
                assert_abs_diff_eq!(g[j][1], (vy1[j] - vy0[j]) / (2.0 * eps), epsilon = 1e-7);
                assert_abs_diff_eq!(h[j][0], (gx1[j][0] - gx0[j][0]) / (2.0 * eps), epsilon = 1e-6);
                assert_abs_diff_eq!(h[j][1], (gy1[j][0] - gy0[j][0]) / (2.0 * eps), epsilon = 1e-6);
                assert_abs_diff_eq!(h[j][1], (gx1[j][1] - gx0[j][1]) / (2.0 * eps), epsilon = 1e-6);
                assert_abs_diff_eq!(h[j][2], (gy1[j][1] - gy0[j][1]) / (2.0 * eps), epsilon = 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(m in 1usize..=MAX_DEGREE, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let xi = if a + b <= 1.0 { [a, b] } else { [1.0 - a, 1.0 - b] };
            let basis = ReferenceBasis::new(m).unwrap();
            let (v, g, h) = basis.evaluate_owned(xi);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            prop_assert!(g.iter().map(|g| g[0]).sum::<f64>().abs() <= 1e-12);
            prop_assert!(g.iter().map(|g| g[1]).sum::<f64>().abs() <= 1e-12);
            for c in 0..3 {
                prop_assert!(h.iter().map(|h| h[c]).sum::<f64>().abs() <= 1e-10);
            }
        }

        #[test]
        fn reproduces_polynomials_of_its_degree(m in 1usize..=MAX_DEGREE, a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let basis = ReferenceBasis::new(m).unwrap();
            let f = |x: [f64; 2]| (x[0] - 0.3 * x[1]).powi(m as i32) + 2.0 * x[1] - 1.0;
            let v = basis.values([a, b]);
            let interp: f64 = basis.nodes().iter().zip(&v).map(|(&n, &phi)| f(n) * phi).sum();
            prop_assert!((interp - f([a, b])).abs() <= 1e-12);
        }
    }
}
