//! Command execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use vpflow::constitutive::certify_laws;
use vpflow::fespace::{build_spaces, Field, Space};
use vpflow::mesh::{build_structured, BoxDomain, Mesh, MeshPair};
use vpflow::solver::{solve_coupled, sweep_k, CoupledProblem, IterationTrace};
use vpflow::tensor::Point;
use vpflow::varexp::EnergyReport;
use vpflow::verify::{check_min_max, estimate_inf_sup_with, run_convergence_study, StudyConfig};

use crate::config::{Command, RunConfig};
use crate::CliError;

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CliError::Io { path, source })
}

/// Creates the output directory and echoes the effective config into it.
fn prepare(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(dir, "config.toml", &cfg.to_toml())?;
    Ok(dir)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare(cfg)?;
    match command {
        Command::Solve => solve(cfg, dir),
        Command::Mms => mms(cfg, dir),
        Command::SweepK => sweep(cfg, dir),
        Command::CertifyLaws => certify(cfg, dir),
        Command::Infsup => infsup(cfg, dir),
    }
}

fn base_mesh(cfg: &RunConfig) -> Result<Mesh, CliError> {
    let d = &cfg.domain;
    Ok(build_structured(
        d.dim,
        &d.divisions,
        &BoxDomain::new(d.dim, &d.lo, &d.hi),
    )?)
}

type Spaces = (Arc<Space>, Arc<Space>, Arc<Space>);

fn flow_spaces(cfg: &RunConfig) -> Result<Spaces, CliError> {
    let pair = MeshPair::from_base(&base_mesh(cfg)?, cfg.mesh.fluid_level, cfg.mesh.conc_level)?;
    let (v, q) = cfg.elements.kinds();
    Ok(build_spaces(&pair, v, q)?)
}

/// Runs `body` on the physical-mode problem described by `cfg`.
fn with_problem<R>(
    cfg: &RunConfig,
    spaces: &Spaces,
    body: impl FnOnce(&CoupledProblem<'_>) -> R,
) -> Result<R, CliError> {
    let (stress, flux) = cfg.law.build()?;
    let swirl = cfg.data.swirl;
    let forcing = move |x: &Point| [-swirl * (x[1] - 0.5), swirl * (x[0] - 0.5), 0.0];
    let boundary = |x: &Point| cfg.data.boundary_c.eval(x);
    let (v, q, z) = spaces;
    Ok(body(&CoupledProblem {
        velocity: v,
        pressure: q,
        concentration: z,
        stress: &stress,
        flux: &flux,
        forcing: &forcing,
        boundary_c: &boundary,
        source: None,
    }))
}

fn energy_text(e: &EnergyReport) -> String {
    format!(
        "E_visc = {:.12e}\nE_stress = {:.12e}\nE_reg = {:.12e}\nE_grad_c = {:.12e}\n",
        e.e_visc, e.e_stress, e.e_reg, e.e_grad_c
    )
}

fn checkpoint(fields: [(&str, &Field); 3]) -> String {
    let mut s = String::new();
    for (name, f) in fields {
        let _ = writeln!(s, "{name} {} {}", f.space().kind().name(), f.coeffs().len());
        for v in f.coeffs() {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
    s
}

fn write_trace(dir: &Path, trace: &IterationTrace) -> Result<(), CliError> {
    write(dir, "trace.csv", &trace.to_csv())
}

fn solve(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let spaces = flow_spaces(cfg)?;
    let solver = cfg.solver.build()?;
    let outcome = with_problem(cfg, &spaces, |p| solve_coupled(p, &solver))?;
    let (sol, trace) = match outcome {
        Ok(v) => v,
        Err(vpflow::Error::NonConvergence {
            what,
            iterations,
            last_change,
            trace,
        }) => {
            if let Some(t) = &trace {
                write_trace(dir, t)?;
            }
            return Err(vpflow::Error::NonConvergence {
                what,
                iterations,
                last_change,
                trace,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(dir, &trace)?;
    let energy = trace.last().map(|r| r.energy).unwrap_or_default();
    write(dir, "energy.txt", &energy_text(&energy))?;
    let boundary = |x: &Point| cfg.data.boundary_c.eval(x);
    let minmax = check_min_max(&sol.c, &boundary);
    write(dir, "minmax.txt", &minmax.to_string())?;
    write(
        dir,
        "solution.txt",
        &checkpoint([("u", &sol.u), ("p", &sol.p), ("c", &sol.c)]),
    )?;
    println!("converged in {} outer iterations", trace.len());
    print!("{}", energy_text(&energy));
    print!("{minmax}");
    Ok(())
}

fn mms(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let case = cfg.mms_case()?;
    let (velocity, pressure) = cfg.elements.kinds();
    let study = StudyConfig {
        base_divisions: cfg.mms.base_divisions,
        levels: cfg.mms.levels.clone(),
        conc_offset: cfg.mms.conc_offset,
        velocity,
        pressure,
        solver: cfg.solver.build()?,
        interpolation_only: cfg.mms.interpolation_only,
    };
    let result = run_convergence_study(&case, &study);
    // a partial table is still written
    write(dir, "eoc.csv", &result.table.to_csv())?;
    print!("{}", result.table);
    result.into_result()?;
    Ok(())
}

fn sweep(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let spaces = flow_spaces(cfg)?;
    let solver = cfg.solver.build()?;
    let report = with_problem(cfg, &spaces, |p| sweep_k(p, &solver, &cfg.sweep.k))?;
    write(dir, "sweep.csv", &report.to_csv())?;
    print!("{}", report.to_csv());
    let failed: Vec<_> = report.rows.iter().filter(|r| r.error.is_some()).collect();
    for row in &failed {
        eprintln!(
            "k = {:e}: {}",
            row.k,
            row.error.as_deref().unwrap_or_default()
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(vpflow::Error::NonConvergence {
            what: "sweep-k solve",
            iterations: solver.outer_maxit,
            last_change: f64::NAN,
            trace: None,
        }
        .into())
    }
}

fn certify(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let (stress, flux) = cfg.law.build()?;
    let c = &cfg.certify;
    let report = certify_laws(&stress, &flux, c.samples, cfg.seed, (c.c_min, c.c_max))?;
    write(dir, "cert.txt", &report.to_string())?;
    print!("{report}");
    Ok(())
}

pub const INFSUP_HEADER: &str = "level,h,beta";

fn infsup(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let base = base_mesh(cfg)?;
    let (vk, qk) = cfg.elements.kinds();
    let mut csv = String::from(INFSUP_HEADER);
    csv.push('\n');
    for &level in &cfg.infsup.levels {
        let mesh = MeshPair::from_base(&base, level, level)?.fluid;
        let v = Space::new(mesh.clone(), vk);
        let q = Space::new(mesh.clone(), qk);
        let est = estimate_inf_sup_with(&v, &q, cfg.infsup.mode(), cfg.seed)?;
        let _ = writeln!(csv, "{level},{:.12e},{:.12e}", mesh.h_max(), est.beta);
    }
    write(dir, "infsup.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
