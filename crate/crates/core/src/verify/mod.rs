//! Manufactured solutions, convergence studies, the min/max report, the
//! inf-sup estimate and the shipped physical scenarios.

pub mod infsup;
pub mod mms;
pub mod study;

use std::fmt;

pub use infsup::{
    estimate_inf_sup, estimate_inf_sup_with, pressure_schur_complement, InfSupEstimate, InfSupMode,
};
pub use mms::{make_mms_case, MmsCase, PRESETS};
pub use study::{
    run_convergence_study, EocRow, EocTable, StudyConfig, StudyResult, EOC_HEADER, ERROR_DEGREE,
};

use crate::assembly::ScalarFn;
use crate::constitutive::{ExponentField, FluxLaw, StressLaw};
use crate::error::{Error, Result};
use crate::fespace::{interpolate_scalar, Field, Space};
use crate::solver::{
    solve_coupled, sweep_k, CoupledProblem, IterationTrace, SolutionTriple, SolverConfig,
    SweepReport,
};
use crate::tensor::{Point, Vec3};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxReport {
    pub c_minus: f64,
    pub c_plus: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// `max(0, c_minus - min C, max C - c_plus)`
    pub violation: f64,
}

impl fmt::Display for MinMaxReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c_minus = {:e}", self.c_minus)?;
        writeln!(f, "c_plus = {:e}", self.c_plus)?;
        writeln!(f, "c_min = {:e}", self.c_min)?;
        writeln!(f, "c_max = {:e}", self.c_max)?;
        writeln!(f, "violation = {:e}", self.violation)
    }
}

/// Compares the nodal range of `c` with the range of the boundary data,
/// sampled at the boundary nodes of the same space.
pub fn check_min_max(c: &Field, c_d: ScalarFn<'_>) -> MinMaxReport {
    let space = c.space();
    let data = interpolate_scalar(space, c_d);
    let range = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
    };
    let mut on_boundary = data
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(i, _)| space.is_boundary_dof(*i))
        .map(|(_, &x)| x);
    let (c_minus, c_plus) = range(&mut on_boundary);
    let (c_min, c_max) = range(&mut c.coeffs().iter().copied());
    let violation = 0.0f64.max(c_minus - c_min).max(c_max - c_plus);
    MinMaxReport {
        c_minus,
        c_plus,
        c_min,
        c_max,
        violation,
    }
}

/// Physical-mode problem data without a concentration source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub stress: StressLaw,
    pub flux: FluxLaw,
    /// Strength of the rotational body force about the box centre.
    pub swirl: f64,
    /// `c_d = c_left + (c_right - c_left) x_1`.
    pub c_left: f64,
    pub c_right: f64,
}

pub const SCENARIOS: &[&str] = &["quiescent", "vortex"];

pub fn scenario(name: &str) -> Result<Scenario> {
    let stress = StressLaw::new(1.0, 1.0, 1.0, ExponentField::new(1.6, 2.4, 4.0, 0.5)?)?;
    let flux = FluxLaw::new(1.0, 0.5)?;
    match name {
        "quiescent" => Ok(Scenario {
            name: "quiescent",
            stress,
            flux,
            swirl: 0.0,
            c_left: 1.0,
            c_right: 1.0,
        }),
        "vortex" => Ok(Scenario {
            name: "vortex",
            stress,
            flux,
            swirl: 50.0,
            c_left: 0.0,
            c_right: 1.0,
        }),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

impl Scenario {
    pub fn forcing(&self, x: &Point) -> Vec3 {
        [-self.swirl * (x[1] - 0.5), self.swirl * (x[0] - 0.5), 0.0]
    }

    pub fn boundary_c(&self, x: &Point) -> f64 {
        self.c_left + (self.c_right - self.c_left) * x[0]
    }

    fn with_problem<R>(
        &self,
        spaces: [&Arc<Space>; 3],
        run: impl FnOnce(&CoupledProblem<'_>) -> R,
    ) -> R {
        let forcing = |x: &Point| self.forcing(x);
        let boundary = |x: &Point| self.boundary_c(x);
        let [velocity, pressure, concentration] = spaces;
        run(&CoupledProblem {
            velocity,
            pressure,
            concentration,
            stress: &self.stress,
            flux: &self.flux,
            forcing: &forcing,
            boundary_c: &boundary,
            source: None,
        })
    }

    /// Coupled solve on the given (velocity, pressure, concentration) spaces.
    pub fn solve(
        &self,
        spaces: [&Arc<Space>; 3],
        cfg: &SolverConfig,
    ) -> Result<(SolutionTriple, IterationTrace)> {
        self.with_problem(spaces, |p| solve_coupled(p, cfg))
    }

    pub fn sweep_k(&self, spaces: [&Arc<Space>; 3], cfg: &SolverConfig, ks: &[f64]) -> SweepReport {
        self.with_problem(spaces, |p| sweep_k(p, cfg, ks))
    }
}
