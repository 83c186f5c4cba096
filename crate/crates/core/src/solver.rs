//! Saddle-point solves, the Picard momentum iteration, the linear
//! concentration step, the alternating outer iteration and the sweep over
//! the regularization parameter.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use crate::assembly::{
    ConcentrationAssembler, MomentumAssembler, MomentumOptions, SaddleSystem, ScalarFn, VectorFn,
    DEFAULT_QUAD_DEGREE,
};
use crate::constitutive::{FluxLaw, StressLaw};
use crate::error::{Error, Result};
use crate::fespace::{interpolate_scalar, Field, Space};
use crate::sparse::{constrained_rcm, rcm, LuFactor, SparseMatrix};
use crate::varexp::{energy_report, sobolev_norm, EnergyReport, DIAGNOSTIC_DEGREE};

const PIVOT_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub t: f64,
    /// `f64::INFINITY` switches the regularization off.
    pub k_reg: f64,
    pub outer_tol: f64,
    pub outer_maxit: usize,
    pub inner_tol: f64,
    pub inner_maxit: usize,
    pub damping: f64,
    pub convection: bool,
    pub quad_degree: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t: 8.0,
            k_reg: 1e4,
            outer_tol: 1e-8,
            outer_maxit: 100,
            inner_tol: 1e-9,
            inner_maxit: 200,
            damping: 1.0,
            convection: true,
            quad_degree: DEFAULT_QUAD_DEGREE,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive ({}, {})",
                self.outer_tol, self.inner_tol
            ));
        }
        if self.outer_maxit == 0 || self.inner_maxit == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1] (got {})", self.damping));
        }
        if !(self.k_reg > 0.0) {
            return bad(format!("k_reg must be positive (got {})", self.k_reg));
        }
        if self.k_reg.is_finite() && !(self.t > 6.0 && self.t.is_finite()) {
            return bad(format!(
                "t must exceed 6 when the regularization is on (got {})",
                self.t
            ));
        }
        if self.quad_degree == 0 {
            return bad("quadrature degree must be at least 1".into());
        }
        Ok(())
    }

    pub fn momentum_options(&self) -> MomentumOptions {
        MomentumOptions {
            t: self.t,
            k_reg: self.k_reg,
            convection: self.convection,
            quad_degree: self.quad_degree,
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|new - old| / max(|new|, |old|)`, zero when both vanish.
fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let d: f64 = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let s = norm2(new).max(norm2(old));
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// Solves `[A, -B^T, 0; -B, 0, m; 0, m^T, 0] (u, p, lambda) = (f, 0, 0)`.
/// The multiplier row forces `m . p = 0`, i.e. a mean-free pressure.
pub fn solve_saddle_point(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let nv = sys.a.nrows();
    let np = sys.bdiv.nrows();
    if sys.f.len() != nv || sys.bdiv.ncols() != nv || sys.m.len() != np {
        return Err(Error::Config(
            "saddle-point blocks have inconsistent sizes".into(),
        ));
    }
    let with_mean = np > 0;
    let n = nv + np + usize::from(with_mean);
    let mut trip = Vec::with_capacity(sys.a.nnz() + 2 * sys.bdiv.nnz() + 2 * np);
    for i in 0..nv {
        let (cols, vals) = sys.a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trip.push((i, j, v));
        }
    }
    for q in 0..np {
        let (cols, vals) = sys.bdiv.row(q);
        for (&j, &v) in cols.iter().zip(vals) {
            if v != 0.0 {
                trip.push((nv + q, j, -v));
                trip.push((j, nv + q, -v));
            }
        }
        if with_mean && sys.m[q] != 0.0 {
            trip.push((nv + q, nv + np, sys.m[q]));
            trip.push((nv + np, nv + q, sys.m[q]));
        }
    }
    let kkt = SparseMatrix::from_triplets(n, n, &trip)?;
    let order = constrained_rcm(&kkt, nv);
    let lu = LuFactor::new(&kkt, &order, PIVOT_TOL)?;
    let mut rhs = vec![0.0; n];
    rhs[..nv].copy_from_slice(&sys.f);
    let x = lu.solve_refined(&kkt, &rhs);
    Ok((x[..nv].to_vec(), x[nv..nv + np].to_vec()))
}

/// `A u - B^T p - f` and a scale for it.
fn saddle_residual(sys: &SaddleSystem, u: &[f64], p: &[f64]) -> (f64, f64) {
    let au = sys.a.matvec(u);
    let btp = sys.bdiv.matvec_transpose(p);
    let r: Vec<f64> = (0..u.len()).map(|i| au[i] - btp[i] - sys.f[i]).collect();
    (norm2(&r), norm2(&sys.f) + norm2(&au) + norm2(&btp))
}

#[derive(Debug, Clone)]
pub struct MomentumSolution {
    pub u: Field,
    pub p: Field,
    pub iterations: usize,
    /// Relative coefficient change per Picard step.
    pub changes: Vec<f64>,
    /// Relative nonlinear residual at each Picard iterate before its solve.
    pub residuals: Vec<f64>,
    /// Relative nonlinear residual of the returned pair.
    pub residual: f64,
}

fn relative(r: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Picard iteration with viscosity and regularization weight frozen at the
/// previous iterate; `initial` defaults to zero.
pub fn solve_momentum(
    asm: &MomentumAssembler,
    conc: &Field,
    law: &StressLaw,
    forcing: VectorFn<'_>,
    cfg: &SolverConfig,
    initial: Option<&Field>,
) -> Result<MomentumSolution> {
    cfg.validate()?;
    let v = asm.velocity_space();
    let q = asm.pressure_space();
    let opts = cfg.momentum_options();
    let mut u = initial.cloned().unwrap_or_else(|| Field::zeros(v));
    let mut p = vec![0.0; q.ndofs()];
    let mut changes = Vec::new();
    let mut residuals = Vec::new();
    for it in 1..=cfg.inner_maxit {
        let sys = asm.assemble(conc, &u, law, forcing, &opts)?;
        let (r, s) = saddle_residual(&sys, u.coeffs(), &p);
        residuals.push(relative(r, s));
        let (un, pn) = solve_saddle_point(&sys)?;
        if !un.iter().chain(&pn).all(|x| x.is_finite()) {
            return Err(Error::Divergence {
                what: "momentum Picard iteration",
                iteration: it,
            });
        }
        let theta = cfg.damping;
        let next: Vec<f64> = un
            .iter()
            .zip(u.coeffs())
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        let change = relative_change(&next, u.coeffs());
        changes.push(change);
        u = Field::from_coeffs(v, next)?;
        p = pn;
        if change <= cfg.inner_tol {
            let sys = asm.assemble(conc, &u, law, forcing, &opts)?;
            let (r, s) = saddle_residual(&sys, u.coeffs(), &p);
            return Ok(MomentumSolution {
                p: Field::from_coeffs(q, p)?,
                u,
                iterations: it,
                changes,
                residuals,
                residual: relative(r, s),
            });
        }
    }
    Err(Error::NonConvergence {
        what: "momentum Picard iteration",
        iterations: cfg.inner_maxit,
        last_change: changes.last().copied().unwrap_or(f64::NAN),
        trace: None,
    })
}

/// One linear concentration solve; also returns the relative residual of
/// `c_prev` in the same system.
fn concentration_step(
    asm: &ConcentrationAssembler,
    velocity: &Field,
    c_prev: &Field,
    lift: &Field,
    law: &FluxLaw,
    source: Option<ScalarFn<'_>>,
) -> Result<(Field, f64)> {
    let sys = asm.assemble(velocity, c_prev, law, lift, source)?;
    let hom_prev: Vec<f64> = c_prev
        .coeffs()
        .iter()
        .zip(lift.coeffs())
        .map(|(c, l)| c - l)
        .collect();
    let kx = sys.matrix.matvec(&hom_prev);
    let r: Vec<f64> = kx.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    let res = relative(norm2(&r), norm2(&sys.rhs) + norm2(&kx));
    let order = rcm(&sys.matrix);
    let lu = LuFactor::new(&sys.matrix, &order, PIVOT_TOL)?;
    let x = lu.solve_refined(&sys.matrix, &sys.rhs);
    let c: Vec<f64> = x.iter().zip(lift.coeffs()).map(|(a, l)| a + l).collect();
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            what: "concentration solve",
            iteration: 1,
        });
    }
    Ok((Field::from_coeffs(asm.space(), c)?, res))
}

/// Linear solve for the concentration with diffusivity frozen at `c_prev`;
/// the result includes the lift.
pub fn solve_concentration(
    asm: &ConcentrationAssembler,
    velocity: &Field,
    c_prev: &Field,
    lift: &Field,
    law: &FluxLaw,
    source: Option<ScalarFn<'_>>,
) -> Result<Field> {
    concentration_step(asm, velocity, c_prev, lift, law, source).map(|(c, _)| c)
}

/// Spaces, laws and data of a coupled solve.
#[derive(Clone, Copy)]
pub struct CoupledProblem<'a> {
    pub velocity: &'a Arc<Space>,
    pub pressure: &'a Arc<Space>,
    pub concentration: &'a Arc<Space>,
    pub stress: &'a StressLaw,
    pub flux: &'a FluxLaw,
    pub forcing: VectorFn<'a>,
    /// Boundary concentration, extended into the domain by interpolation.
    pub boundary_c: ScalarFn<'a>,
    /// Manufactured concentration source (verification mode only).
    pub source: Option<ScalarFn<'a>>,
}

#[derive(Debug, Clone)]
pub struct SolutionTriple {
    pub u: Field,
    pub p: Field,
    pub c: Field,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub res_mom: f64,
    pub res_conc: f64,
    pub du_rel: f64,
    pub dc_rel: f64,
    pub energy: EnergyReport,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "iter,res_mom,res_conc,dU_rel,dC_rel,E_visc,E_stress,E_reg,E_grad_c";

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let e = &r.energy;
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.iter,
                r.res_mom,
                r.res_conc,
                r.du_rel,
                r.dc_rel,
                e.e_visc,
                e.e_stress,
                e.e_reg,
                e.e_grad_c
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Lower bound on `r_minus` for the coupled scheme.
pub const MIN_R_MINUS: f64 = 1.5;

/// Alternating iteration: start from the lift of the boundary data, solve
/// the momentum problem against the current concentration, then the
/// concentration problem against the new velocity, until the relative
/// changes of both fall below `outer_tol`.
pub fn solve_coupled(
    problem: &CoupledProblem<'_>,
    cfg: &SolverConfig,
) -> Result<(SolutionTriple, IterationTrace)> {
    cfg.validate()?;
    let r_minus = problem.stress.exponent.r_minus;
    if !(r_minus > MIN_R_MINUS) {
        return Err(Error::Config(format!(
            "the coupled scheme needs r_minus > 3/2 (got {r_minus})"
        )));
    }
    let masm = MomentumAssembler::new(problem.velocity, problem.pressure, cfg.quad_degree)?;
    let casm = ConcentrationAssembler::new(problem.concentration, cfg.quad_degree)?
        .with_convection(cfg.convection);
    let lift = interpolate_scalar(problem.concentration, problem.boundary_c);
    let mut c = lift.clone();
    let mut u = Field::zeros(problem.velocity);
    let mut trace = IterationTrace::default();
    let mut last_change = f64::NAN;
    for it in 1..=cfg.outer_maxit {
        let mom = solve_momentum(&masm, &c, problem.stress, problem.forcing, cfg, Some(&u))?;
        let (c_next, res_conc) =
            concentration_step(&casm, &mom.u, &c, &lift, problem.flux, problem.source)?;
        let du = relative_change(mom.u.coeffs(), u.coeffs());
        let dc = relative_change(c_next.coeffs(), c.coeffs());
        let energy = energy_report(&mom.u, &c_next, problem.stress, cfg.t, cfg.k_reg)?;
        trace.rows.push(TraceRow {
            iter: it,
            res_mom: mom.residual,
            res_conc,
            du_rel: du,
            dc_rel: dc,
            energy,
            inner_iterations: mom.iterations,
        });
        u = mom.u;
        c = c_next;
        last_change = du.max(dc);
        if !last_change.is_finite() {
            return Err(Error::Divergence {
                what: "coupled iteration",
                iteration: it,
            });
        }
        if last_change <= cfg.outer_tol {
            return Ok((SolutionTriple { u, p: mom.p, c }, trace));
        }
    }
    Err(Error::NonConvergence {
        what: "coupled iteration",
        iterations: cfg.outer_maxit,
        last_change,
        trace: Some(Box::new(trace)),
    })
}

/// `max_q |int q div u|` over the pressure basis.
pub fn divergence_residual(pressure: &Arc<Space>, u: &Field) -> Result<f64> {
    let asm = MomentumAssembler::new(u.space(), pressure, DEFAULT_QUAD_DEGREE)?;
    let b = asm.divergence_matrix()?;
    Ok(b.matvec(u.coeffs()).iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    /// `None` when the solve for this `k` failed.
    pub e_reg: Option<f64>,
    /// `W^{1,r_minus}` distance to the previous successful solution.
    pub dist_prev: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "k,E_reg,dist_prev";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.12e}"));
        let mut s = String::from(SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{:e},{},{}", r.k, fmt(r.e_reg), fmt(r.dist_prev));
        }
        s
    }
}

/// Solves the coupled problem for each `k` in turn. Failures are recorded
/// in their row and the sweep continues.
pub fn sweep_k(problem: &CoupledProblem<'_>, cfg: &SolverConfig, ks: &[f64]) -> SweepReport {
    let r_minus = problem.stress.exponent.r_minus;
    let mut prev: Option<Field> = None;
    let mut report = SweepReport::default();
    for &k in ks {
        let local = SolverConfig { k_reg: k, ..*cfg };
        let row = match solve_coupled(problem, &local) {
            Ok((sol, trace)) => {
                let e_reg = trace.last().map(|r| r.energy.e_reg);
                let dist = match &prev {
                    Some(p) => {
                        let diff: Vec<f64> = sol
                            .u
                            .coeffs()
                            .iter()
                            .zip(p.coeffs())
                            .map(|(a, b)| a - b)
                            .collect();
                        Field::from_coeffs(problem.velocity, diff)
                            .and_then(|d| sobolev_norm(&d, r_minus, DIAGNOSTIC_DEGREE))
                            .ok()
                    }
                    None => None,
                };
                prev = Some(sol.u);
                SweepRow {
                    k,
                    e_reg,
                    dist_prev: dist,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                k,
                e_reg: None,
                dist_prev: None,
                error: Some(e.to_string()),
            },
        };
        report.rows.push(row);
    }
    report
}
