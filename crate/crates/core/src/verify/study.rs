//! Convergence studies against manufactured solutions.

use std::fmt::{self, Write as _};

use super::mms::MmsCase;
use crate::constitutive::conjugate;
use crate::error::{Error, Result};
use crate::fespace::{
    build_spaces, interpolate, interpolate_cellwise, interpolate_scalar, zero_mean_project,
    ElementKind, Field,
};
use crate::mesh::{build_structured, BoxDomain, MeshPair};
use crate::solver::{divergence_residual, solve_coupled, CoupledProblem, SolverConfig};
use crate::tensor::{self, Point};
use crate::varexp::{
    energy_report, lebesgue_norm, luxembourg_norm, sobolev_norm, EnergyReport, ModularSamples,
};

/// Quadrature degree for errors against analytic fields.
pub const ERROR_DEGREE: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Divisions per axis of the level-0 box mesh.
    pub base_divisions: usize,
    pub levels: Vec<usize>,
    /// Concentration mesh level minus fluid mesh level.
    pub conc_offset: usize,
    pub velocity: ElementKind,
    pub pressure: ElementKind,
    pub solver: SolverConfig,
    /// Skip the solve and measure interpolation errors only.
    pub interpolation_only: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            base_divisions: 2,
            levels: vec![1, 2, 3, 4],
            conc_offset: 0,
            velocity: ElementKind::VectorP2,
            pressure: ElementKind::P0,
            solver: SolverConfig::default(),
            interpolation_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocRow {
    pub level: usize,
    pub h: f64,
    pub err_u_w1rm: f64,
    pub err_u_lux: f64,
    pub err_p: f64,
    pub err_c_w12: f64,
    pub err_c_l2: f64,
    pub eoc_u: Option<f64>,
    pub eoc_p: Option<f64>,
    pub eoc_c: Option<f64>,
    pub energy: EnergyReport,
    pub outer_iterations: usize,
    /// `max_q |int q div U|`.
    pub div_residual: f64,
    /// `W^{1,2}` norm of the discrete velocity.
    pub u_w12: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

pub const EOC_HEADER: &str =
    "level,h,err_u_W1rm,err_u_lux,err_p,err_c_W12,err_c_L2,eoc_u,eoc_p,eoc_c";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl EocTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EOC_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
                r.level,
                r.h,
                r.err_u_w1rm,
                r.err_u_lux,
                r.err_p,
                r.err_c_w12,
                r.err_c_l2,
                fmt_opt(r.eoc_u),
                fmt_opt(r.eoc_p),
                fmt_opt(r.eoc_c)
            );
        }
        s
    }
}

impl fmt::Display for EocTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5} {:>10} {:>11} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7} {:>7}",
            "level", "h", "u W1,r-", "u lux", "p", "c W1,2", "c L2", "eoc u", "eoc p", "eoc c"
        )?;
        for r in &self.rows {
            let o = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
            writeln!(
                f,
                "{:>5} {:>10.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>7} {:>7} {:>7}",
                r.level,
                r.h,
                r.err_u_w1rm,
                r.err_u_lux,
                r.err_p,
                r.err_c_w12,
                r.err_c_l2,
                o(r.eoc_u),
                o(r.eoc_p),
                o(r.eoc_c)
            )?;
        }
        Ok(())
    }
}

/// A table, complete or cut short by the error that stopped it.
#[derive(Debug)]
pub struct StudyResult {
    pub table: EocTable,
    pub error: Option<Error>,
}

impl StudyResult {
    pub fn into_result(self) -> Result<EocTable> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.table),
        }
    }
}

fn eoc(e0: f64, e1: f64, h0: f64, h1: f64) -> Option<f64> {
    if e0 > 0.0 && e1 > 0.0 && h0 != h1 {
        Some((e0 / e1).ln() / (h0 / h1).ln())
    } else {
        None
    }
}

/// Per-level solves (or interpolation) with errors measured by quadrature
/// against the analytic fields.
pub fn run_convergence_study(case: &MmsCase, cfg: &StudyConfig) -> StudyResult {
    let mut table = EocTable::default();
    if cfg.levels.len() < 3 || cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        let msg = format!(
            "a study needs at least 3 increasing levels, got {:?}",
            cfg.levels
        );
        return StudyResult {
            table,
            error: Some(Error::Config(msg)),
        };
    }
    for &level in &cfg.levels {
        match study_level(case, cfg, level) {
            Ok(row) => {
                if let Some(prev) = table.rows.last() {
                    let mut row = row;
                    row.eoc_u = eoc(prev.err_u_w1rm, row.err_u_w1rm, prev.h, row.h);
                    row.eoc_p = eoc(prev.err_p, row.err_p, prev.h, row.h);
                    row.eoc_c = eoc(prev.err_c_w12, row.err_c_w12, prev.h, row.h);
                    table.rows.push(row);
                } else {
                    table.rows.push(row);
                }
            }
            Err(e) => {
                return StudyResult {
                    table,
                    error: Some(e),
                };
            }
        }
    }
    StudyResult { table, error: None }
}

fn study_level(case: &MmsCase, cfg: &StudyConfig, level: usize) -> Result<EocRow> {
    let dim = case.dim;
    let base = build_structured(dim, &vec![cfg.base_divisions; dim], &BoxDomain::unit(dim))?;
    let pair = MeshPair::from_base(&base, level, level + cfg.conc_offset)?;
    let (v, q, z) = build_spaces(&pair, cfg.velocity, cfg.pressure)?;
    let solver = SolverConfig {
        t: case.t,
        k_reg: case.k_reg,
        convection: case.convection,
        ..cfg.solver
    };
    let (u, p, c, iterations) = if cfg.interpolation_only {
        let u = interpolate(&v, |x| case.velocity(x));
        let p = zero_mean_project(&interpolate_cellwise(&q, |_, x, _| {
            [case.pressure(x), 0.0, 0.0]
        }));
        let c = interpolate_scalar(&z, |x| case.concentration(x));
        (u, p, c, 0)
    } else {
        let forcing = |x: &Point| case.forcing(x);
        let boundary = |x: &Point| case.boundary_c(x);
        let source = |x: &Point| case.source(x);
        let problem = CoupledProblem {
            velocity: &v,
            pressure: &q,
            concentration: &z,
            stress: &case.stress,
            flux: &case.flux,
            forcing: &forcing,
            boundary_c: &boundary,
            source: Some(&source),
        };
        let (sol, trace) = solve_coupled(&problem, &solver)?;
        (sol.u, sol.p, sol.c, trace.len())
    };
    let errors = level_errors(case, &u, &p, &c)?;
    Ok(EocRow {
        level,
        h: pair.fluid.h_max(),
        err_u_w1rm: errors[0],
        err_u_lux: errors[1],
        err_p: errors[2],
        err_c_w12: errors[3],
        err_c_l2: errors[4],
        eoc_u: None,
        eoc_p: None,
        eoc_c: None,
        energy: energy_report(&u, &c, &case.stress, case.t, case.k_reg)?,
        outer_iterations: iterations,
        div_residual: divergence_residual(&q, &u)?,
        u_w12: sobolev_norm(&u, 2.0, ERROR_DEGREE)?,
    })
}

/// `[u W^{1,r-}, u Luxembourg W^{1,r(c)}, p L^{(r+)'}, c W^{1,2}, c L^2]`.
fn level_errors(case: &MmsCase, u: &Field, p: &Field, c: &Field) -> Result<[f64; 5]> {
    let fluid = u.space().mesh();
    let exp = &case.stress.exponent;
    let mut val = Vec::new();
    let mut pe = Vec::new();
    let grad = ModularSamples::on_mesh(fluid, ERROR_DEGREE, |ci, bary, x| {
        let uh = u.eval(ci, bary)?;
        let ph = p.eval(ci, bary)?;
        let e = tensor::sub(&case.velocity(x), &uh.value);
        let ge = tensor::mat_sub(&case.velocity_grad(x), &uh.grad);
        let r = exp.eval(case.concentration(x));
        val.push((tensor::norm(&e), r));
        pe.push(case.pressure(x) - ph.value[0]);
        Ok((tensor::frob(&ge), r))
    })?;
    let (vm, vr): (Vec<f64>, Vec<f64>) = val.into_iter().unzip();
    let values = grad.with_values(vm, vr)?;
    let n = pe.len();
    let pres = grad.with_values(pe, vec![2.0; n])?;
    let rm = exp.r_minus;
    let err_u_w1rm = lebesgue_norm(&values, rm) + lebesgue_norm(&grad, rm);
    let err_u_lux = luxembourg_norm(&values)?.value + luxembourg_norm(&grad)?.value;
    let err_p = lebesgue_norm(&pres, conjugate(exp.r_plus));

    let cm = c.space().mesh();
    let mut cv = Vec::new();
    let cg = ModularSamples::on_mesh(cm, ERROR_DEGREE, |ci, bary, x| {
        let ch = c.eval(ci, bary)?;
        cv.push(case.concentration(x) - ch.value[0]);
        let g = tensor::sub(&case.concentration_grad(x), &ch.grad[0]);
        Ok((tensor::norm(&g), 2.0))
    })?;
    let n = cv.len();
    let cvals = cg.with_values(cv, vec![2.0; n])?;
    let l2 = lebesgue_norm(&cvals, 2.0);
    let h1 = lebesgue_norm(&cg, 2.0);
    Ok([err_u_w1rm, err_u_lux, err_p, (l2 * l2 + h1 * h1).sqrt(), l2])
}
