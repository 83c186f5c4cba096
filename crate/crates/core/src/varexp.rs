//! Variable-exponent modulars and Luxembourg norms, fixed-exponent Sobolev
//! norms of discrete fields, energy diagnostics and a log-Hölder estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{conjugate, ExponentField, StressLaw};
use crate::error::{Error, Result};
use crate::fespace::Field;
use crate::mesh::Mesh;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::tensor::{self, Point};

/// Quadrature degree used for diagnostics.
pub const DIAGNOSTIC_DEGREE: usize = 7;

const LUX_RTOL: f64 = 1e-12;
const LUX_LOWER: f64 = 1e-12;
const LUX_UPPER_MAX: f64 = 1e30;

/// `|f|` and `r` tabulated at quadrature points together with the weights,
/// so that the modular can be re-evaluated for many scalings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModularSamples {
    weights: Vec<f64>,
    magnitudes: Vec<f64>,
    exponents: Vec<f64>,
}

impl ModularSamples {
    pub fn new(weights: Vec<f64>, magnitudes: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if weights.len() != magnitudes.len() || weights.len() != exponents.len() {
            return Err(Error::Config("sample arrays differ in length".into()));
        }
        for (i, ((w, m), r)) in weights.iter().zip(&magnitudes).zip(&exponents).enumerate() {
            if !(w.is_finite() && m.is_finite() && r.is_finite()) {
                return Err(Error::NonFinite { cell: i });
            }
        }
        Ok(ModularSamples {
            weights,
            magnitudes: magnitudes.into_iter().map(f64::abs).collect(),
            exponents,
        })
    }

    /// Samples `f(cell, bary, x) = (|f|, r)` at a rule of degree `degree`
    /// on every cell.
    pub fn on_mesh(
        mesh: &Mesh,
        degree: usize,
        mut f: impl FnMut(usize, &[f64; 4], &Point) -> Result<(f64, f64)>,
    ) -> Result<Self> {
        let rule = quadrature_rule(mesh.dim(), degree)?;
        let n = rule.len() * mesh.n_cells();
        let mut s = ModularSamples {
            weights: Vec::with_capacity(n),
            magnitudes: Vec::with_capacity(n),
            exponents: Vec::with_capacity(n),
        };
        let rv = QuadratureRule::reference_volume(mesh.dim());
        for ci in 0..mesh.n_cells() {
            let jf = mesh.cell_volume(ci) / rv;
            for (bary, w) in rule.iter() {
                let (m, r) = f(ci, bary, &mesh.point_at(ci, bary))?;
                if !(m.is_finite() && r.is_finite()) {
                    return Err(Error::NonFinite { cell: ci });
                }
                s.weights.push(w * jf);
                s.magnitudes.push(m.abs());
                s.exponents.push(r);
            }
        }
        Ok(s)
    }

    /// Same points and weights, different integrand.
    pub fn with_values(&self, magnitudes: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        ModularSamples::new(self.weights.clone(), magnitudes, exponents)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `int |f|^r`.
    pub fn modular(&self) -> f64 {
        self.modular_scaled(1.0)
    }

    /// `int |f / lambda|^r`.
    pub fn modular_scaled(&self, lambda: f64) -> f64 {
        let mut s = 0.0;
        for ((w, m), r) in self
            .weights
            .iter()
            .zip(&self.magnitudes)
            .zip(&self.exponents)
        {
            if *m > 0.0 {
                s += w * (r * (m / lambda).ln()).exp();
            }
        }
        s
    }

    /// Multiplies every magnitude by `|a|`.
    pub fn scaled(&self, a: f64) -> Self {
        ModularSamples {
            weights: self.weights.clone(),
            magnitudes: self.magnitudes.iter().map(|m| m * a.abs()).collect(),
            exponents: self.exponents.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        self.magnitudes
            .iter()
            .zip(&self.weights)
            .all(|(m, w)| *m == 0.0 || *w == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuxNormResult {
    pub value: f64,
    pub iterations: usize,
    /// Modular of `f / value`; at most `1 + 1e-10`.
    pub modular: f64,
}

/// `inf { lambda > 0 : modular(f / lambda) <= 1 }` by bisection.
pub fn luxembourg_norm(samples: &ModularSamples) -> Result<LuxNormResult> {
    if samples.is_zero() {
        return Ok(LuxNormResult {
            value: 0.0,
            iterations: 0,
            modular: 0.0,
        });
    }
    let mut lo = LUX_LOWER;
    let mut hi = 1.0;
    let mut iterations = 0;
    while samples.modular_scaled(hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if hi > LUX_UPPER_MAX {
            return Err(Error::NormOverflow);
        }
    }
    while samples.modular_scaled(lo) <= 1.0 {
        // norm below the initial bracket
        hi = lo;
        lo *= 1e-3;
        iterations += 1;
        if lo < f64::MIN_POSITIVE {
            return Ok(LuxNormResult {
                value: hi,
                iterations,
                modular: samples.modular_scaled(hi),
            });
        }
    }
    while hi - lo > LUX_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if samples.modular_scaled(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(LuxNormResult {
        value: hi,
        iterations,
        modular: samples.modular_scaled(hi),
    })
}

/// Ordinary `L^r` norm of tabulated magnitudes (exponents ignored).
pub fn lebesgue_norm(samples: &ModularSamples, r: f64) -> f64 {
    let s: f64 = samples
        .weights
        .iter()
        .zip(&samples.magnitudes)
        .map(|(w, m)| w * m.powf(r))
        .sum();
    s.powf(1.0 / r)
}

/// `||f||_{L^r} + ||grad f||_{L^r}` with the Frobenius norm on gradients.
pub fn sobolev_norm(f: &Field, r: f64, degree: usize) -> Result<f64> {
    let mesh = f.space().mesh().clone();
    let mut vals = Vec::new();
    let grads = ModularSamples::on_mesh(&mesh, degree, |ci, bary, _| {
        let pv = f.eval(ci, bary)?;
        vals.push(tensor::norm(&pv.value));
        Ok((tensor::frob(&pv.grad), r))
    })?;
    let values = ModularSamples {
        magnitudes: vals,
        ..grads.clone()
    };
    Ok(lebesgue_norm(&values, r) + lebesgue_norm(&grads, r))
}

/// Energy diagnostics of a velocity/concentration pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyReport {
    /// `int |DU|^{r(C)}`
    pub e_visc: f64,
    /// `int |S(C, DU)|^{r'(C)}`
    pub e_stress: f64,
    /// `(1/k) int |U|^t`, zero when the regularization is off
    pub e_reg: f64,
    /// `int |grad C|^2`
    pub e_grad_c: f64,
}

/// Integrates on whichever of the two meshes is finer; the coarser field is
/// evaluated by point location.
pub fn energy_report(
    u: &Field,
    c: &Field,
    law: &StressLaw,
    t: f64,
    k_reg: f64,
) -> Result<EnergyReport> {
    let um = u.space().mesh();
    let cm = c.space().mesh();
    let mesh = if cm.n_cells() > um.n_cells() {
        cm.clone()
    } else {
        um.clone()
    };
    let inv_k = if k_reg.is_finite() { 1.0 / k_reg } else { 0.0 };
    let rule = quadrature_rule(mesh.dim(), DIAGNOSTIC_DEGREE)?;
    let rv = QuadratureRule::reference_volume(mesh.dim());
    let mut e = EnergyReport::default();
    for ci in 0..mesh.n_cells() {
        let jf = mesh.cell_volume(ci) / rv;
        for (bary, w) in rule.iter() {
            let w = w * jf;
            let uv = u.eval_on(&mesh, ci, bary)?;
            let cv = c.eval_on(&mesh, ci, bary)?;
            let cval = cv.value[0];
            let r = law.exponent.eval(cval);
            let du = tensor::sym(&uv.grad);
            let dn = tensor::frob(&du);
            let s = law.stress(cval, &du)?;
            e.e_visc += w * dn.powf(r);
            e.e_stress += w * tensor::frob(&s).powf(conjugate(r));
            if inv_k > 0.0 {
                e.e_reg += w * inv_k * tensor::norm(&uv.value).powf(t);
            }
            e.e_grad_c += w * tensor::dot(&cv.grad[0], &cv.grad[0]);
        }
        if !(e.e_visc.is_finite() && e.e_stress.is_finite() && e.e_reg.is_finite()) {
            return Err(Error::NonFinite { cell: ci });
        }
    }
    Ok(e)
}

/// Largest sampled `|r(C(x)) - r(C(y))| * (-ln |x - y|)` over pairs with
/// `0 < |x - y| <= 1/2`; an empirical lower bound for the log-Hölder
/// constant.
pub fn log_holder_estimate(
    exponent: &ExponentField,
    c: &Field,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if exponent.is_constant() {
        return Ok(0.0);
    }
    let mesh = c.space().mesh();
    let dim = mesh.dim();
    let (lo, hi) = mesh.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < n_pairs && attempts < 20 * n_pairs.max(1) {
        attempts += 1;
        let mut x = [0.0; 3];
        for k in 0..dim {
            x[k] = rng.random_range(lo[k]..=hi[k]);
        }
        // distances spread over many scales
        let d = 10f64.powf(rng.random_range(-6.0..(0.5f64).log10()));
        let mut dir = [0.0; 3];
        for v in dir.iter_mut().take(dim) {
            *v = rng.random_range(-1.0..1.0);
        }
        let n = tensor::norm(&dir);
        if n < 1e-3 {
            continue;
        }
        let y = tensor::add(&x, &tensor::scale(d / n, &dir));
        let (Ok(cx), Ok(cy)) = (c.eval_at(&x), c.eval_at(&y)) else {
            continue;
        };
        accepted += 1;
        let dist = tensor::dist(&x, &y);
        if dist > 0.0 && dist <= 0.5 {
            let dr = (exponent.eval(cx.value[0]) - exponent.eval(cy.value[0])).abs();
            best = best.max(dr * -dist.ln());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{interpolate, interpolate_scalar, ElementKind, Space};
    use crate::mesh::{build_structured, BoxDomain};
    use std::sync::Arc;

    fn unit_square(n: usize) -> Arc<Mesh> {
        Arc::new(build_structured(2, &[n, n], &BoxDomain::unit(2)).unwrap())
    }

    #[test]
    fn unit_constant_has_norm_one_for_any_exponent() {
        let m = unit_square(4);
        let s =
            ModularSamples::on_mesh(&m, 5, |_, _, x| Ok((1.0, 1.2 + 3.0 * x[0] * x[1]))).unwrap();
        let n = luxembourg_norm(&s).unwrap();
        assert!((n.value - 1.0).abs() < 1e-11, "{}", n.value);
        assert!(n.modular <= 1.0 + 1e-10);
    }

    #[test]
    fn zero_field() {
        let m = unit_square(2);
        let s = ModularSamples::on_mesh(&m, 3, |_, _, _| Ok((0.0, 2.0))).unwrap();
        assert_eq!(s.modular(), 0.0);
        let n = luxembourg_norm(&s).unwrap();
        assert_eq!((n.value, n.iterations), (0.0, 0));
    }

    #[test]
    fn constant_exponent_reduces_to_lebesgue() {
        // int_(0,1)^2 (x+y)^3 = 3/2
        let m = unit_square(3);
        let s = ModularSamples::on_mesh(&m, 3, |_, _, x| Ok((x[0] + x[1], 3.0))).unwrap();
        let n = luxembourg_norm(&s).unwrap();
        assert!((n.value - 1.5f64.powf(1.0 / 3.0)).abs() < 1e-10 * n.value);
        assert!((lebesgue_norm(&s, 3.0) - n.value).abs() < 1e-10 * n.value);
    }

    #[test]
    fn unit_ball_and_bracket_invariants() {
        let m = unit_square(3);
        for scale in [1e-9, 1e-3, 1.0, 1e5, 1e12] {
            let s = ModularSamples::on_mesh(&m, 5, |_, _, x| {
                Ok((scale * (1.0 + x[0]), 1.6 + 0.8 * x[1]))
            })
            .unwrap();
            let n = luxembourg_norm(&s).unwrap();
            assert!(
                n.modular <= 1.0 + 1e-10 && n.modular >= 1.0 - 1e-8,
                "{scale}: {}",
                n.modular
            );
            assert!(s.modular_scaled(n.value * (1.0 - 1e-8)) > 1.0);
        }
    }

    #[test]
    fn modular_strictly_decreasing_in_lambda() {
        let m = unit_square(2);
        let s = ModularSamples::on_mesh(&m, 4, |_, _, x| Ok((x[0] - 0.3, 1.5 + x[1]))).unwrap();
        let a = s.modular_scaled(0.5);
        let b = s.modular_scaled(1.0);
        let c = s.modular_scaled(2.0);
        assert!(a > b && b > c && c > 0.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = unit_square(1);
        assert!(matches!(
            ModularSamples::on_mesh(&m, 1, |_, _, _| Ok((f64::NAN, 2.0))),
            Err(Error::NonFinite { .. })
        ));
        let huge = ModularSamples::new(vec![1.0], vec![f64::MAX], vec![1.0]).unwrap();
        assert!(matches!(luxembourg_norm(&huge), Err(Error::NormOverflow)));
    }

    #[test]
    fn energies_of_newtonian_law() {
        let m = unit_square(3);
        let v = Space::new(m.clone(), ElementKind::VectorP2);
        let z = Space::new(m, ElementKind::ScalarP1);
        let u = interpolate(&v, |x| [x[1] * x[1], x[0] * x[1], 0.0]);
        let c = interpolate_scalar(&z, |x| x[0]);
        let law = StressLaw::new(1.7, 1.0, 1.0, ExponentField::constant(2.0).unwrap()).unwrap();
        let e = energy_report(&u, &c, &law, 8.0, f64::INFINITY).unwrap();
        assert!((e.e_stress - 1.7 * 1.7 * e.e_visc).abs() < 1e-13 * e.e_stress);
        assert_eq!(e.e_reg, 0.0);
        assert!((e.e_grad_c - 1.0).abs() < 1e-14);
        let zero = energy_report(&Field::zeros(&v), &Field::zeros(&z), &law, 8.0, 1e4).unwrap();
        assert_eq!(zero, EnergyReport::default());
    }

    #[test]
    fn sobolev_norm_of_linear_field() {
        let m = unit_square(2);
        let z = Space::new(m, ElementKind::ScalarP1);
        let f = interpolate_scalar(&z, |x| x[0]);
        // ||x||_{L^2} = 1/sqrt(3), ||grad x||_{L^2} = 1
        let n = sobolev_norm(&f, 2.0, 4).unwrap();
        assert!((n - (1.0 / 3f64.sqrt() + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn log_holder_trivial_cases() {
        let m = unit_square(4);
        let z = Space::new(m, ElementKind::ScalarP1);
        let c = interpolate_scalar(&z, |x| x[0]);
        let flat = ExponentField::new(1.6, 2.4, 0.0, 0.0).unwrap();
        assert_eq!(log_holder_estimate(&flat, &c, 100, 0).unwrap(), 0.0);
        assert_eq!(
            log_holder_estimate(&ExponentField::constant(1.8).unwrap(), &c, 100, 0).unwrap(),
            0.0
        );
    }
}
