//! Manufactured solutions with closed-form forcing and source.
//!
//! Velocities come from a stream function `psi = A prod sin^2(pi x_k)`:
//! `u = (psi_y, -psi_x)` in 2D and `u = grad(psi) x (1, 1, 1)` in 3D, both
//! divergence-free and vanishing with their first derivatives on the
//! boundary of the unit box.

use std::f64::consts::PI;

use crate::constitutive::{ExponentField, FluxLaw, StressLaw};
use crate::error::{Error, Result};
use crate::tensor::{self, Mat3, Point, Vec3, ZERO3, ZERO33};

/// Third-order tensor `h[i][k][l] = d^2 u_i / dx_k dx_l`.
pub type Hessian3 = [[[f64; 3]; 3]; 3];

/// `d^n/dx^n sin^2(pi x)`.
fn sin2(x: f64, n: usize) -> f64 {
    match n {
        0 => (PI * x).sin().powi(2),
        1 => PI * (2.0 * PI * x).sin(),
        2 => 2.0 * PI * PI * (2.0 * PI * x).cos(),
        3 => -4.0 * PI.powi(3) * (2.0 * PI * x).sin(),
        _ => unreachable!("only derivatives up to third order are used"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsCase {
    pub name: &'static str,
    pub dim: usize,
    pub stress: StressLaw,
    pub flux: FluxLaw,
    pub t: f64,
    pub k_reg: f64,
    pub convection: bool,
    pub stream_amplitude: f64,
    pub pressure_amplitude: f64,
    /// `c = c0 + grad_c . x + bubble_amplitude * 4^d prod x_k (1 - x_k)`.
    pub c0: f64,
    pub grad_c: Vec3,
    pub bubble_amplitude: f64,
}

pub const PRESETS: &[&str] = &["stokes2d", "coupled2d", "stokes3d", "coupled3d"];

/// Builds a preset; `dim` must match the preset's dimension.
pub fn make_mms_case(preset: &str, dim: usize) -> Result<MmsCase> {
    let (kind, pdim) = match preset {
        "stokes2d" => ("stokes", 2),
        "coupled2d" => ("coupled", 2),
        "stokes3d" => ("stokes", 3),
        "coupled3d" => ("coupled", 3),
        _ => return Err(Error::UnknownPreset(preset.to_string())),
    };
    if pdim != dim {
        return Err(Error::Config(format!(
            "preset '{preset}' is {pdim}-dimensional, not {dim}-dimensional"
        )));
    }
    let base = MmsCase {
        name: PRESETS
            .iter()
            .find(|p| **p == preset)
            .copied()
            .unwrap_or("custom"),
        dim,
        stress: StressLaw::newtonian(1.0),
        flux: FluxLaw::new(1.0, 0.0)?,
        t: 8.0,
        k_reg: f64::INFINITY,
        convection: false,
        stream_amplitude: 1.0,
        pressure_amplitude: 0.2,
        c0: 0.2,
        grad_c: [0.6, -0.4, 0.3],
        bubble_amplitude: 1.0,
    };
    Ok(match kind {
        "stokes" => base,
        _ => MmsCase {
            stress: StressLaw::new(1.0, 1.0, 1.0, ExponentField::new(1.6, 2.4, 4.0, 0.5)?)?,
            flux: FluxLaw::new(1.0, 0.5)?,
            k_reg: 1e4,
            stream_amplitude: 0.5,
            convection: true,
            pressure_amplitude: 1.0,
            ..base
        },
    })
}

impl MmsCase {
    fn psi(&self, x: &Point, alpha: [usize; 3]) -> f64 {
        (0..self.dim).map(|k| sin2(x[k], alpha[k])).product::<f64>() * self.stream_amplitude
    }

    /// `u_i = sum_m w[i][m] d_m psi`.
    fn weights(&self) -> Mat3 {
        if self.dim == 2 {
            [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0; 3]]
        } else {
            [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]]
        }
    }

    pub fn velocity(&self, x: &Point) -> Vec3 {
        let w = self.weights();
        let mut u = ZERO3;
        for i in 0..self.dim {
            for m in 0..self.dim {
                if w[i][m] != 0.0 {
                    let mut a = [0; 3];
                    a[m] += 1;
                    u[i] += w[i][m] * self.psi(x, a);
                }
            }
        }
        u
    }

    /// `g[i][k] = d u_i / d x_k`.
    pub fn velocity_grad(&self, x: &Point) -> Mat3 {
        let w = self.weights();
        let mut g = ZERO33;
        for i in 0..self.dim {
            for k in 0..self.dim {
                for m in 0..self.dim {
                    if w[i][m] != 0.0 {
                        let mut a = [0; 3];
                        a[m] += 1;
                        a[k] += 1;
                        g[i][k] += w[i][m] * self.psi(x, a);
                    }
                }
            }
        }
        g
    }

    pub fn velocity_hessian(&self, x: &Point) -> Hessian3 {
        let w = self.weights();
        let mut h = [[[0.0; 3]; 3]; 3];
        for i in 0..self.dim {
            for k in 0..self.dim {
                for l in 0..self.dim {
                    for m in 0..self.dim {
                        if w[i][m] != 0.0 {
                            let mut a = [0; 3];
                            a[m] += 1;
                            a[k] += 1;
                            a[l] += 1;
                            h[i][k][l] += w[i][m] * self.psi(x, a);
                        }
                    }
                }
            }
        }
        h
    }

    /// `amp prod cos(pi x_k)`, mean-free on the unit box.
    pub fn pressure(&self, x: &Point) -> f64 {
        self.pressure_amplitude * (0..self.dim).map(|k| (PI * x[k]).cos()).product::<f64>()
    }

    pub fn pressure_grad(&self, x: &Point) -> Vec3 {
        let mut g = ZERO3;
        for k in 0..self.dim {
            g[k] = -PI * self.pressure_amplitude;
            for j in 0..self.dim {
                g[k] *= if j == k {
                    (PI * x[j]).sin()
                } else {
                    (PI * x[j]).cos()
                };
            }
        }
        g
    }

    fn bubble_scale(&self) -> f64 {
        self.bubble_amplitude * 4f64.powi(self.dim as i32)
    }

    /// Boundary data: the affine part of the concentration.
    pub fn boundary_c(&self, x: &Point) -> f64 {
        self.c0 + (0..self.dim).map(|k| self.grad_c[k] * x[k]).sum::<f64>()
    }

    pub fn concentration(&self, x: &Point) -> f64 {
        let b: f64 = (0..self.dim).map(|k| x[k] * (1.0 - x[k])).product();
        self.boundary_c(x) + self.bubble_scale() * b
    }

    pub fn concentration_grad(&self, x: &Point) -> Vec3 {
        let mut g = ZERO3;
        for k in 0..self.dim {
            let mut prod = 1.0 - 2.0 * x[k];
            for j in (0..self.dim).filter(|&j| j != k) {
                prod *= x[j] * (1.0 - x[j]);
            }
            g[k] = self.grad_c[k] + self.bubble_scale() * prod;
        }
        g
    }

    pub fn concentration_laplacian(&self, x: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let mut prod = -2.0;
            for j in (0..self.dim).filter(|&j| j != k) {
                prod *= x[j] * (1.0 - x[j]);
            }
            s += prod;
        }
        self.bubble_scale() * s
    }

    /// Symmetric gradient and its derivatives `dd[k][l][j] = d D_kl / d x_j`.
    fn strain(&self, x: &Point) -> (Mat3, Hessian3) {
        let g = self.velocity_grad(x);
        let h = self.velocity_hessian(x);
        let mut dd = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                for j in 0..3 {
                    dd[k][l][j] = 0.5 * (h[k][l][j] + h[l][k][j]);
                }
            }
        }
        (tensor::sym(&g), dd)
    }

    /// `grad |Du|^2`.
    fn grad_b2(d: &Mat3, dd: &Hessian3) -> Vec3 {
        let mut g = ZERO3;
        for (j, gj) in g.iter_mut().enumerate() {
            for k in 0..3 {
                for l in 0..3 {
                    *gj += 2.0 * d[k][l] * dd[k][l][j];
                }
            }
        }
        g
    }

    /// `div(u (x) u) - div S(c, Du) + (1/k)|u|^{t-2} u + grad p`.
    pub fn forcing(&self, x: &Point) -> Vec3 {
        let u = self.velocity(x);
        let g = self.velocity_grad(x);
        let (d, dd) = self.strain(x);
        let c = self.concentration(x);
        let gc = self.concentration_grad(x);
        let law = &self.stress;
        let b2 = tensor::ddot(&d, &d);
        let r = law.exponent.eval(c);
        let base = law.kappa1 + law.kappa2 * b2;
        let nu = law.nu0 * base.powf(0.5 * (r - 2.0));
        let nu_c = nu * 0.5 * law.exponent.derivative(c) * base.ln();
        let nu_b = nu * 0.5 * (r - 2.0) * law.kappa2 / base;
        let gb2 = Self::grad_b2(&d, &dd);
        let grad_nu: Vec3 = std::array::from_fn(|j| nu_c * gc[j] + nu_b * gb2[j]);
        let gp = self.pressure_grad(x);
        let reg = if self.k_reg.is_finite() {
            tensor::norm(&u).powf(self.t - 2.0) / self.k_reg
        } else {
            0.0
        };
        let mut f = ZERO3;
        for i in 0..self.dim {
            let mut div_s = 0.0;
            for j in 0..self.dim {
                div_s += nu * dd[i][j][j] + d[i][j] * grad_nu[j];
            }
            let conv = if self.convection {
                (0..self.dim).map(|k| u[k] * g[i][k]).sum()
            } else {
                0.0
            };
            f[i] = conv - div_s + reg * u[i] + gp[i];
        }
        f
    }

    /// `div(c u) - div q(c, grad c, Du)` (the convective part only when
    /// convection is on).
    pub fn source(&self, x: &Point) -> f64 {
        let u = self.velocity(x);
        let (d, dd) = self.strain(x);
        let gc = self.concentration_grad(x);
        let b2 = tensor::ddot(&d, &d);
        let kappa = self.flux.diffusivity(self.concentration(x), b2);
        let gb2 = Self::grad_b2(&d, &dd);
        let dk = self.flux.k1 / (1.0 + b2).powi(2);
        let div_q = kappa * self.concentration_laplacian(x) + dk * tensor::dot(&gb2, &gc);
        let conv = if self.convection {
            tensor::dot(&u, &gc)
        } else {
            0.0
        };
        conv - div_q
    }
}
