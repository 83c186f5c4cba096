//! Concentration-dependent power-law stress, the concentration flux, and a
//! sampling-based check of their structural properties.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{self, Mat3, Vec3, ZERO33};

/// Smallest `kappa1` accepted by default; `StressLaw::new_unchecked`
/// bypasses it.
pub const KAPPA1_MIN: f64 = 1e-4;

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic exponent profile
/// `r(c) = r_plus + (r_minus - r_plus) * sigma(gamma * (c - c_mid))`,
/// decreasing from `r_plus` to `r_minus` as `c` grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentField {
    pub r_minus: f64,
    pub r_plus: f64,
    pub gamma: f64,
    pub c_mid: f64,
}

impl ExponentField {
    pub fn new(r_minus: f64, r_plus: f64, gamma: f64, c_mid: f64) -> Result<Self> {
        if !(r_minus > 1.0 && r_plus >= r_minus && r_plus.is_finite()) {
            return Err(Error::Config(format!(
                "exponent bounds must satisfy 1 < r_minus <= r_plus < inf (got {r_minus}, {r_plus})"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite() && c_mid.is_finite()) {
            return Err(Error::Config(format!(
                "logistic slope must be finite and >= 0 (got {gamma})"
            )));
        }
        Ok(ExponentField {
            r_minus,
            r_plus,
            gamma,
            c_mid,
        })
    }

    pub fn constant(r: f64) -> Result<Self> {
        ExponentField::new(r, r, 0.0, 0.0)
    }

    pub fn eval(&self, c: f64) -> f64 {
        let r =
            self.r_plus + (self.r_minus - self.r_plus) * logistic(self.gamma * (c - self.c_mid));
        r.clamp(self.r_minus, self.r_plus)
    }

    pub fn derivative(&self, c: f64) -> f64 {
        let s = logistic(self.gamma * (c - self.c_mid));
        (self.r_minus - self.r_plus) * self.gamma * s * (1.0 - s)
    }

    pub fn lipschitz(&self) -> f64 {
        self.gamma * (self.r_plus - self.r_minus) / 4.0
    }

    pub fn is_constant(&self) -> bool {
        self.gamma == 0.0 || self.r_minus == self.r_plus
    }
}

/// Conjugate exponent `r / (r - 1)`.
pub fn conjugate(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Fourth-order tensor `D[i][j][k][l]`.
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// `S(c, B) = nu0 (kappa1 + kappa2 |B|^2)^((r(c) - 2) / 2) B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressLaw {
    pub nu0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub exponent: ExponentField,
}

impl StressLaw {
    pub fn new(nu0: f64, kappa1: f64, kappa2: f64, exponent: ExponentField) -> Result<Self> {
        if kappa1 < KAPPA1_MIN {
            return Err(Error::Config(format!(
                "kappa1 = {kappa1} is below the minimum {KAPPA1_MIN}"
            )));
        }
        StressLaw::new_unchecked(nu0, kappa1, kappa2, exponent)
    }

    /// Like [`StressLaw::new`] but allows `kappa1` down to 0.
    pub fn new_unchecked(
        nu0: f64,
        kappa1: f64,
        kappa2: f64,
        exponent: ExponentField,
    ) -> Result<Self> {
        if !(nu0 > 0.0 && kappa1 >= 0.0 && kappa2 > 0.0) || !(nu0 * kappa1 * kappa2).is_finite() {
            return Err(Error::Config(format!(
                "stress law needs nu0 > 0, kappa1 >= 0, kappa2 > 0 (got {nu0}, {kappa1}, {kappa2})"
            )));
        }
        Ok(StressLaw {
            nu0,
            kappa1,
            kappa2,
            exponent,
        })
    }

    /// Newtonian law `S = nu0 B`.
    pub fn newtonian(nu0: f64) -> Self {
        StressLaw {
            nu0,
            kappa1: 1.0,
            kappa2: 1.0,
            exponent: ExponentField::constant(2.0).expect("2 is a valid exponent"),
        }
    }

    /// Scalar viscosity `S / B` as a function of `c` and `|B|^2`.
    pub fn viscosity(&self, c: f64, b_norm2: f64) -> Result<f64> {
        let r = self.exponent.eval(c);
        self.viscosity_with_exponent(r, b_norm2)
    }

    pub fn viscosity_with_exponent(&self, r: f64, b_norm2: f64) -> Result<f64> {
        let base = self.kappa1 + self.kappa2 * b_norm2;
        if base == 0.0 && r < 2.0 {
            return Err(Error::SingularViscosity { r });
        }
        Ok(self.nu0 * base.powf(0.5 * (r - 2.0)))
    }

    pub fn stress(&self, c: f64, b: &Mat3) -> Result<Mat3> {
        let b = tensor::sym(b);
        let nu = self.viscosity(c, tensor::ddot(&b, &b))?;
        Ok(tensor::mat_scale(nu, &b))
    }

    /// `dS/dB` at `(c, B)`:
    /// `nu I_sym + (r - 2) kappa2 nu0 (kappa1 + kappa2|B|^2)^((r-4)/2) B (x) B`.
    pub fn stress_derivative(&self, c: f64, b: &Mat3) -> Result<Tensor4> {
        let b = tensor::sym(b);
        let b2 = tensor::ddot(&b, &b);
        let r = self.exponent.eval(c);
        let nu = self.viscosity_with_exponent(r, b2)?;
        let base = self.kappa1 + self.kappa2 * b2;
        let coef = if r == 2.0 {
            0.0
        } else {
            (r - 2.0) * self.kappa2 * self.nu0 * base.powf(0.5 * (r - 2.0) - 1.0)
        };
        let mut d = [[[[0.0; 3]; 3]; 3]; 3];
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        d[i][j][k][l] =
                            nu * 0.5 * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k))
                                + coef * b[i][j] * b[k][l];
                    }
                }
            }
        }
        Ok(d)
    }
}

/// Contraction `D : H`.
pub fn apply4(d: &Tensor4, h: &Mat3) -> Mat3 {
    let mut out = ZERO33;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = tensor::ddot(&d[i][j], h);
        }
    }
    out
}

/// `q(c, g, B) = (k0 + k1 |B|^2 / (1 + |B|^2)) g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLaw {
    pub k0: f64,
    pub k1: f64,
}

impl FluxLaw {
    pub fn new(k0: f64, k1: f64) -> Result<Self> {
        if !(k0 > 0.0 && k1 >= 0.0 && (k0 + k1).is_finite()) {
            return Err(Error::Config(format!(
                "flux law needs k0 > 0, k1 >= 0 (got {k0}, {k1})"
            )));
        }
        Ok(FluxLaw { k0, k1 })
    }

    pub fn diffusivity(&self, _c: f64, b_norm2: f64) -> f64 {
        self.k0 + self.k1 * b_norm2 / (1.0 + b_norm2)
    }

    pub fn flux(&self, c: f64, g: &Vec3, b: &Mat3) -> Vec3 {
        let k = self.diffusivity(c, tensor::ddot(b, b));
        tensor::scale(k, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub samples: usize,
    pub seed: u64,
    pub c_range: (f64, f64),
    /// max |S| / (|B|^(r-1) + 1)
    pub growth_c1: f64,
    /// min (S(B1) - S(B2)) : (B1 - B2) over distinct pairs
    pub monotonicity_min_gap: f64,
    /// min of the gap divided by |B1 - B2|^2 (scale-free view)
    pub monotonicity_min_ratio: f64,
    pub monotone_pairs_skipped: usize,
    pub coercivity_c2: f64,
    pub coercivity_c3: f64,
    /// max |q| / |g|
    pub flux_c4: f64,
    /// min q . g / |g|^2
    pub flux_c5: f64,
    pub growth_ok: bool,
    pub monotone_ok: bool,
    pub coercive_ok: bool,
    pub flux_ok: bool,
}

impl CertReport {
    pub fn all_pass(&self) -> bool {
        self.growth_ok && self.monotone_ok && self.coercive_ok && self.flux_ok
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples = {}", self.samples)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "c_range = [{:e}, {:e}]", self.c_range.0, self.c_range.1)?;
        writeln!(f, "growth_C1 = {:e}", self.growth_c1)?;
        writeln!(f, "monotonicity_min_gap = {:e}", self.monotonicity_min_gap)?;
        writeln!(
            f,
            "monotonicity_min_ratio = {:e}",
            self.monotonicity_min_ratio
        )?;
        writeln!(
            f,
            "monotonicity_pairs_skipped = {}",
            self.monotone_pairs_skipped
        )?;
        writeln!(f, "coercivity_C2 = {:e}", self.coercivity_c2)?;
        writeln!(f, "coercivity_C3 = {:e}", self.coercivity_c3)?;
        writeln!(f, "flux_C4 = {:e}", self.flux_c4)?;
        writeln!(f, "flux_C5 = {:e}", self.flux_c5)?;
        writeln!(f, "growth_pass = {}", self.growth_ok)?;
        writeln!(f, "monotonicity_pass = {}", self.monotone_ok)?;
        writeln!(f, "coercivity_pass = {}", self.coercive_ok)?;
        writeln!(f, "flux_pass = {}", self.flux_ok)?;
        writeln!(f, "all_pass = {}", self.all_pass())
    }
}

/// Random symmetric 3x3 tensor with Frobenius norm log-uniform in
/// `[1e-3, 1e3]`.
fn sample_tensor(rng: &mut ChaCha8Rng) -> Mat3 {
    let mut b = ZERO33;
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = StandardNormal.sample(rng);
        }
    }
    let b = tensor::sym(&b);
    let n = tensor::frob(&b);
    let target = 10f64.powf(rng.random_range(-3.0..3.0));
    tensor::mat_scale(target / n, &b)
}

/// Sampled check of growth, strict monotonicity and coercivity of the
/// stress and of the flux bounds. Violations are reported, not raised.
pub fn certify_laws(
    stress: &StressLaw,
    flux: &FluxLaw,
    n_samples: usize,
    seed: u64,
    c_range: (f64, f64),
) -> Result<CertReport> {
    if n_samples == 0 {
        return Err(Error::Config(
            "certification needs at least one sample".into(),
        ));
    }
    if !(c_range.0 <= c_range.1) {
        return Err(Error::Config(format!(
            "empty concentration range {c_range:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_c = |rng: &mut ChaCha8Rng| {
        if c_range.0 == c_range.1 {
            c_range.0
        } else {
            rng.random_range(c_range.0..c_range.1)
        }
    };
    let mut c1: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut skipped = 0;
    let mut coercive = Vec::with_capacity(n_samples);
    let mut c4: f64 = 0.0;
    let mut c5 = f64::INFINITY;
    let mut finite = true;
    for _ in 0..n_samples {
        let c = draw_c(&mut rng);
        let r = stress.exponent.eval(c);
        let b = sample_tensor(&mut rng);
        let s = stress.stress(c, &b)?;
        let bn = tensor::frob(&b);
        let sn = tensor::frob(&s);
        c1 = c1.max(sn / (bn.powf(r - 1.0) + 1.0));
        coercive.push((tensor::ddot(&s, &b), bn.powf(r) + sn.powf(conjugate(r)), bn));
        finite &= sn.is_finite();

        let b1 = sample_tensor(&mut rng);
        let b2 = if rng.random_bool(0.1) {
            b1
        } else {
            sample_tensor(&mut rng)
        };
        let diff = tensor::mat_sub(&b1, &b2);
        let dn = tensor::frob(&diff);
        if dn < 1e-8 {
            skipped += 1;
        } else {
            let ds = tensor::mat_sub(&stress.stress(c, &b1)?, &stress.stress(c, &b2)?);
            let gap = tensor::ddot(&ds, &diff);
            min_gap = min_gap.min(gap);
            min_ratio = min_ratio.min(gap / (dn * dn));
        }

        let mut g: Vec3 = [0.0; 3];
        for v in g.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let g = tensor::scale(
            10f64.powf(rng.random_range(-3.0..3.0)) / tensor::norm(&g),
            &g,
        );
        let q = flux.flux(c, &g, &b);
        let gg = tensor::dot(&g, &g);
        c4 = c4.max(tensor::norm(&q) / gg.sqrt());
        c5 = c5.min(tensor::dot(&q, &g) / gg);
    }
    // C2 from the large-|B| regime, C3 absorbs the rest
    let c2 = coercive
        .iter()
        .filter(|(_, _, bn)| *bn >= 1.0)
        .map(|(sb, m, _)| sb / m)
        .fold(f64::INFINITY, f64::min);
    let c2 = if c2.is_finite() { c2 } else { 0.0 };
    let c3 = coercive
        .iter()
        .map(|(sb, m, _)| c2 * m - sb)
        .fold(0.0, f64::max);
    Ok(CertReport {
        samples: n_samples,
        seed,
        c_range,
        growth_c1: c1,
        monotonicity_min_gap: min_gap,
        monotonicity_min_ratio: min_ratio,
        monotone_pairs_skipped: skipped,
        coercivity_c2: c2,
        coercivity_c3: c3,
        flux_c4: c4,
        flux_c5: c5,
        growth_ok: finite && c1.is_finite(),
        monotone_ok: min_gap > 0.0 || (min_gap.is_infinite() && skipped == n_samples),
        coercive_ok: c2 > 0.0 && c3.is_finite(),
        flux_ok: c5 >= flux.k0 * (1.0 - 1e-12) && c4 <= (flux.k0 + flux.k1) * (1.0 + 1e-12),
    })
}
