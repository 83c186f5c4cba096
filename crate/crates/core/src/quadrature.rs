//! Quadrature on the reference simplex via collapsed (conical product)
//! Gauss–Jacobi rules. All weights are positive.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 8;

/// Rule on the reference simplex of dimension 1, 2 or 3. Points are stored
/// as barycentric coordinates (first `dim + 1` entries); weights sum to the
/// reference volume (1, 1/2, 1/6).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 4], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn reference_volume(dim: usize) -> f64 {
        match dim {
            1 => 1.0,
            2 => 0.5,
            _ => 1.0 / 6.0,
        }
    }
}

/// Gauss–Jacobi nodes and weights for the weight `(1 - x)^alpha` on
/// `[-1, 1]` (Golub–Welsch).
fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let beta = 0.0;
    let ab = alpha + beta;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        j[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let num = 4.0 * m * (m + alpha) * (m + beta) * (m + ab);
            let den = (2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0);
            let off = (num / den).sqrt();
            j[(k, k + 1)] = off;
            j[(k + 1, k)] = off;
        }
    }
    // integral of the weight over [-1, 1] with beta = 0
    let mu0 = 2f64.powf(alpha + 1.0) / (alpha + 1.0);
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Jacobi rule mapped to `[0, 1]` for the weight `(1 - s)^alpha`.
fn unit_rule(n: usize, alpha: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_jacobi(n, alpha);
    let scale = 2f64.powf(-(alpha + 1.0));
    x.into_iter()
        .zip(w)
        .map(|(xi, wi)| (0.5 * (1.0 + xi), wi * scale))
        .collect()
}

/// Rule exact for polynomials of total degree `degree` on the reference
/// simplex of dimension `dim`.
pub fn quadrature_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidMesh(format!(
            "no quadrature in dimension {dim}"
        )));
    }
    let n = (degree.max(1) + 2) / 2;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for (s, w) in unit_rule(n, 0.0) {
                points.push([1.0 - s, s, 0.0, 0.0]);
                weights.push(w);
            }
        }
        2 => {
            // x = s, y = (1 - s) t; Jacobian (1 - s)
            let rs = unit_rule(n, 1.0);
            let rt = unit_rule(n, 0.0);
            for &(s, ws) in &rs {
                for &(t, wt) in &rt {
                    let (x, y) = (s, (1.0 - s) * t);
                    points.push([1.0 - x - y, x, y, 0.0]);
                    weights.push(ws * wt);
                }
            }
        }
        _ => {
            // x = s, y = (1 - s) t, z = (1 - s)(1 - t) u; Jacobian (1-s)^2 (1-t)
            let rs = unit_rule(n, 2.0);
            let rt = unit_rule(n, 1.0);
            let ru = unit_rule(n, 0.0);
            for &(s, ws) in &rs {
                for &(t, wt) in &rt {
                    for &(u, wu) in &ru {
                        let x = s;
                        let y = (1.0 - s) * t;
                        let z = (1.0 - s) * (1.0 - t) * u;
                        points.push([1.0 - x - y - z, x, y, z]);
                        weights.push(ws * wt * wu);
                    }
                }
            }
        }
    }
    Ok(QuadratureRule {
        dim,
        degree,
        points,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact monomial integral over the reference simplex:
    /// a! b! c! / (a + b + c + d)!.
    fn monomial_exact(dim: usize, e: [u32; 3]) -> f64 {
        let s: u32 = e[..dim].iter().sum();
        e[..dim].iter().map(|&k| factorial(k)).product::<f64>() / factorial(s + dim as u32)
    }

    fn apply(rule: &QuadratureRule, e: [u32; 3]) -> f64 {
        rule.iter()
            .map(|(p, w)| {
                let mut v = w;
                for k in 0..rule.dim {
                    v *= p[k + 1].powi(e[k] as i32);
                }
                v
            })
            .sum()
    }

    #[test]
    fn monomials_exact_up_to_degree() {
        for dim in 1..=3 {
            for deg in 1..=MAX_DEGREE {
                let rule = quadrature_rule(dim, deg).unwrap();
                assert!(rule.weights.iter().all(|&w| w > 0.0));
                for a in 0..=deg as u32 {
                    for b in 0..=(deg as u32 - a) {
                        for c in 0..=(deg as u32 - a - b) {
                            let e = [a, if dim > 1 { b } else { 0 }, if dim > 2 { c } else { 0 }];
                            let got = apply(&rule, e);
                            let want = monomial_exact(dim, e);
                            assert!(
                                (got - want).abs() < 1e-14,
                                "dim {dim} deg {deg} {e:?}: {got} vs {want}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn centroid_rule_and_examples() {
        let r = quadrature_rule(2, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        for k in 0..3 {
            assert!((r.points[0][k] - 1.0 / 3.0).abs() < 1e-15);
        }
        let r = quadrature_rule(3, 2).unwrap();
        assert!((apply(&r, [1, 1, 0]) - 1.0 / 120.0).abs() < 1e-16);
    }

    #[test]
    fn barycentric_points_sum_to_one() {
        for dim in 1..=3 {
            let r = quadrature_rule(dim, 7).unwrap();
            for (p, _) in r.iter() {
                let s: f64 = p[..=dim].iter().sum();
                assert!((s - 1.0).abs() < 1e-15);
                assert!(p[..=dim].iter().all(|&l| l > 0.0));
            }
        }
    }

    #[test]
    fn degree_too_high() {
        assert!(matches!(
            quadrature_rule(2, 9),
            Err(Error::UnsupportedQuadrature(9))
        ));
    }
}
