//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpflow::assembly::{eval_bc, eval_bu};
use vpflow::constitutive::{certify_laws, ExponentField, FluxLaw, StressLaw};
use vpflow::fespace::{build_spaces, ElementKind, Field, Space};
use vpflow::mesh::{build_structured, BoxDomain, Mesh, MeshPair};
use vpflow::quadrature::quadrature_rule;
use vpflow::solver::{divergence_residual, SolverConfig};
use vpflow::tensor::{self, Point};
use vpflow::varexp::{luxembourg_norm, sobolev_norm, ModularSamples};
use vpflow::verify::{
    check_min_max, estimate_inf_sup, estimate_inf_sup_with, make_mms_case, run_convergence_study,
    scenario, EocRow, EocTable, InfSupMode, StudyConfig,
};

type Check = Result<String, String>;

/// `(where, max |int q div U|, |U|_{W^{1,2}})` for every converged solve.
type DivRecords = Vec<(String, f64, f64)>;

fn base_square() -> Mesh {
    build_structured(2, &[2, 2], &BoxDomain::unit(2)).unwrap()
}

fn level_mesh(level: usize) -> Arc<Mesh> {
    MeshPair::from_base(&base_square(), level, level)
        .unwrap()
        .fluid
}

fn random_field(space: &Arc<Space>, rng: &mut ChaCha8Rng) -> Field {
    Field::from_coeffs(
        space,
        (0..space.ndofs())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

fn skew_symmetry() -> Check {
    let mesh = level_mesh(2);
    let v = Space::new(mesh.clone(), ElementKind::VectorP2);
    let z = Space::new(mesh, ElementKind::ScalarP1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_field(&v, &mut rng);
        let w = random_field(&v, &mut rng);
        let c = random_field(&z, &mut rng);
        let (na, nw, nc) = (
            sobolev_norm(&a, 2.0, 4).map_err(|e| e.to_string())?,
            sobolev_norm(&w, 2.0, 4).map_err(|e| e.to_string())?,
            sobolev_norm(&c, 2.0, 4).map_err(|e| e.to_string())?,
        );
        let bu = eval_bu(&a, &w, &w).map_err(|e| e.to_string())?.abs() / (na * nw * nw);
        let bc = eval_bc(&c, &a, &c).map_err(|e| e.to_string())?.abs() / (nc * na * nc);
        worst = worst.max(bu).max(bc);
    }
    let detail = format!("max normalized |B| over 100 triples = {worst:.2e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn incompressibility(records: &DivRecords) -> Check {
    let mut worst = (0.0f64, String::new());
    for (label, res, norm) in records {
        let ratio = res / norm;
        if ratio >= worst.0 {
            worst = (ratio, label.clone());
        }
    }
    let detail = format!(
        "{} solves, worst max|int q div U| / |U|_W12 = {:.2e} ({})",
        records.len(),
        worst.0,
        worst.1
    );
    if records.is_empty() {
        Err("no converged solves recorded".into())
    } else if worst.0 <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn record_study(table: &EocTable, name: &str, records: &mut DivRecords) {
    for row in &table.rows {
        records.push((
            format!("{name} level {}", row.level),
            row.div_residual,
            row.u_w12,
        ));
    }
}

fn newtonian_rates(records: &mut DivRecords) -> Check {
    let case = make_mms_case("stokes2d", 2).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let table = run_convergence_study(&case, &StudyConfig::default())
        .into_result()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    record_study(&table, "stokes2d", records);
    let last = table.rows.last().ok_or("empty table")?;
    let (u, p, c) = (
        last.eoc_u.unwrap_or(f64::NAN),
        last.eoc_p.unwrap_or(f64::NAN),
        last.eoc_c.unwrap_or(f64::NAN),
    );
    let detail = format!(
        "EOC u = {u:.3}, p = {p:.3}, c = {c:.3}, runtime {:.1}s",
        elapsed.as_secs_f64()
    );
    let ok = (1.9..=2.1).contains(&u)
        && (0.9..=1.1).contains(&p)
        && (0.9..=1.1).contains(&c)
        && elapsed < Duration::from_secs(120);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn coupled_table(records: &mut DivRecords) -> Result<EocTable, String> {
    let case = make_mms_case("coupled2d", 2).map_err(|e| e.to_string())?;
    let cfg = StudyConfig {
        levels: vec![1, 2, 3],
        ..Default::default()
    };
    let table = run_convergence_study(&case, &cfg)
        .into_result()
        .map_err(|e| e.to_string())?;
    record_study(&table, "coupled2d", records);
    Ok(table)
}

fn variable_exponent_convergence(table: &Result<EocTable, String>) -> Check {
    let table = table.as_ref().map_err(|e| e.clone())?;
    type Column = (&'static str, fn(&EocRow) -> f64);
    let columns: [Column; 5] = [
        ("u W1,r-", |r| r.err_u_w1rm),
        ("u lux", |r| r.err_u_lux),
        ("p", |r| r.err_p),
        ("c W1,2", |r| r.err_c_w12),
        ("c L2", |r| r.err_c_l2),
    ];
    let mut parts = Vec::new();
    let mut ok = table.rows.len() == 3;
    for (name, get) in columns {
        let vals: Vec<f64> = table.rows.iter().map(get).collect();
        ok &= vals.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!(
            "{name} {:.2e}->{:.2e}",
            vals[0],
            vals[vals.len() - 1]
        ));
    }
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn energy_boundedness(table: &Result<EocTable, String>) -> Check {
    let table = table.as_ref().map_err(|e| e.clone())?;
    let first = &table.rows.first().ok_or("empty table")?.energy;
    let last = &table.rows.last().ok_or("empty table")?.energy;
    let change = |a: f64, b: f64| (b - a).abs() / a.abs();
    let visc = change(first.e_visc, last.e_visc);
    let stress = change(first.e_stress, last.e_stress);
    let grad_c = change(first.e_grad_c, last.e_grad_c);
    let reg = table
        .rows
        .iter()
        .map(|r| r.energy.e_reg / r.energy.e_visc)
        .fold(0.0, f64::max);
    let detail = format!(
        "change E_visc {:.1}%, E_stress {:.1}%, E_grad_c {:.1}%; max E_reg/E_visc = {reg:.2e}",
        100.0 * visc,
        100.0 * stress,
        100.0 * grad_c
    );
    if visc < 0.2 && stress < 0.2 && grad_c < 0.2 && reg < 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The CLI's default physical configuration with the vortex data.
fn shipped_spaces(level: usize) -> (Arc<Space>, Arc<Space>, Arc<Space>) {
    let pair = MeshPair::from_base(&base_square(), level, level).unwrap();
    build_spaces(&pair, ElementKind::VectorP2, ElementKind::P0).unwrap()
}

fn regularization_sweep() -> Check {
    let s = scenario("vortex").map_err(|e| e.to_string())?;
    let (v, q, z) = shipped_spaces(2);
    let report = s.sweep_k(
        [&v, &q, &z],
        &SolverConfig::default(),
        &[1e1, 1e2, 1e3, 1e4],
    );
    if let Some(row) = report.rows.iter().find(|r| r.error.is_some()) {
        return Err(format!(
            "k = {:e} failed: {}",
            row.k,
            row.error.as_deref().unwrap_or_default()
        ));
    }
    let e_reg: Vec<f64> = report.rows.iter().filter_map(|r| r.e_reg).collect();
    let dist: Vec<f64> = report.rows.iter().filter_map(|r| r.dist_prev).collect();
    let ratios: Vec<f64> = dist.windows(2).map(|w| w[0] / w[1]).collect();
    let detail = format!(
        "E_reg {:?}, dist_prev ratios per decade {:?}",
        e_reg.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
        ratios.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>()
    );
    let ok = e_reg.len() == 4
        && dist.len() == 3
        && e_reg.windows(2).all(|w| w[1] <= w[0])
        && ratios.iter().all(|&r| r >= 2.0);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn min_max_principle(records: &mut DivRecords) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    let quiet = scenario("quiescent").map_err(|e| e.to_string())?;
    for level in [2, 3] {
        let (v, q, z) = shipped_spaces(level);
        let (sol, _) = quiet
            .solve([&v, &q, &z], &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        let cd = |x: &Point| quiet.boundary_c(x);
        let rep = check_min_max(&sol.c, &cd);
        ok &= rep.violation == 0.0;
        parts.push(format!("constant c_d level {level}: {:e}", rep.violation));
    }
    let vortex = scenario("vortex").map_err(|e| e.to_string())?;
    let mut seq = Vec::new();
    for level in 1..=3 {
        let (v, q, z) = shipped_spaces(level);
        let (sol, _) = vortex
            .solve([&v, &q, &z], &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        records.push((
            format!("vortex level {level}"),
            divergence_residual(&q, &sol.u).map_err(|e| e.to_string())?,
            sobolev_norm(&sol.u, 2.0, 7).map_err(|e| e.to_string())?,
        ));
        let cd = |x: &Point| vortex.boundary_c(x);
        seq.push(check_min_max(&sol.c, &cd).violation);
    }
    ok &= seq.windows(2).all(|w| w[1] <= w[0]);
    parts.push(format!("vortex violations {seq:?}"));
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Positive root of `a l^-1.5 + b l^-3 = 1` by Newton from the left, where
/// the function is convex and decreasing.
fn piecewise_root(a: f64, b: f64) -> f64 {
    let mut l: f64 = 0.05;
    for _ in 0..200 {
        let g = a * l.powf(-1.5) + b * l.powi(-3) - 1.0;
        let dg = -1.5 * a * l.powf(-2.5) - 3.0 * b * l.powi(-4);
        let next = l - g / dg;
        if (next - l).abs() <= 1e-15 * l {
            return next;
        }
        l = next;
    }
    l
}

fn luxembourg_oracle() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    // constant exponents against the ordinary L^r norm from the same samples
    let mesh = level_mesh(2);
    let f = |x: &Point| (std::f64::consts::PI * x[0]).sin() + x[1] - 0.3;
    let mut worst_const: f64 = 0.0;
    for r in [1.2, 2.0, 3.7] {
        let s = ModularSamples::on_mesh(&mesh, 7, |_, _, x| Ok((f(x).abs(), r)))
            .map_err(|e| e.to_string())?;
        let lux = luxembourg_norm(&s).map_err(|e| e.to_string())?.value;
        let rule = quadrature_rule(2, 7).map_err(|e| e.to_string())?;
        let mut sum = 0.0;
        for ci in 0..mesh.n_cells() {
            for (bary, w) in rule.iter() {
                let x = mesh.point_at(ci, &bary[..3]);
                sum += w * mesh.cell_volume(ci) / 0.5 * f(&x).abs().powf(r);
            }
        }
        let lp = sum.powf(1.0 / r);
        worst_const = worst_const.max((lux - lp).abs() / lp);
    }
    ok &= worst_const <= 1e-10;
    parts.push(format!("constant r rel. dev {worst_const:.1e}"));

    // f(x) = x on (0,1) with r = 3/2 below 1/2 and r = 3 above
    let rule = quadrature_rule(1, 8).map_err(|e| e.to_string())?;
    let mut intervals = Vec::new();
    let mut hi = 0.5;
    for _ in 0..80 {
        intervals.push((0.5 * hi, hi));
        hi *= 0.5;
    }
    intervals.push((0.0, hi));
    for k in 0..8 {
        intervals.push((0.5 + k as f64 / 16.0, 0.5 + (k + 1) as f64 / 16.0));
    }
    let (mut w, mut m, mut r) = (Vec::new(), Vec::new(), Vec::new());
    for (lo, hi) in intervals {
        for (p, wt) in rule.iter() {
            let x = lo + (hi - lo) * p[0];
            w.push(wt * (hi - lo));
            m.push(x);
            r.push(if x < 0.5 { 1.5 } else { 3.0 });
        }
    }
    let s = ModularSamples::new(w, m, r).map_err(|e| e.to_string())?;
    let lux = luxembourg_norm(&s).map_err(|e| e.to_string())?.value;
    let root = piecewise_root(0.5f64.powf(2.5) / 2.5, 15.0 / 64.0);
    let dev = (lux - root).abs() / root;
    ok &= dev <= 1e-8;
    parts.push(format!(
        "piecewise 1D {lux:.12} vs root {root:.12} (rel. {dev:.1e})"
    ));

    // homogeneity with a variable exponent
    let s = ModularSamples::on_mesh(&mesh, 5, |_, _, x| {
        Ok((f(x).abs(), 1.6 + 0.8 * x[0] * x[1]))
    })
    .map_err(|e| e.to_string())?;
    let base = luxembourg_norm(&s).map_err(|e| e.to_string())?.value;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_h: f64 = 0.0;
    for _ in 0..50 {
        let a =
            10f64.powf(rng.random_range(-6.0..6.0)) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let scaled = luxembourg_norm(&s.scaled(a))
            .map_err(|e| e.to_string())?
            .value;
        worst_h = worst_h.max((scaled - a.abs() * base).abs() / (a.abs() * base));
    }
    ok &= worst_h <= 1e-10;
    parts.push(format!("homogeneity worst rel. {worst_h:.1e}"));
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn law_certification() -> Check {
    let exponent = ExponentField::new(1.6, 2.4, 4.0, 0.5).map_err(|e| e.to_string())?;
    let stress = StressLaw::new(1.0, 1.0, 1.0, exponent).map_err(|e| e.to_string())?;
    let flux = FluxLaw::new(1.0, 0.5).map_err(|e| e.to_string())?;
    let a = certify_laws(&stress, &flux, 10_000, 7, (0.0, 1.0)).map_err(|e| e.to_string())?;
    let b = certify_laws(&stress, &flux, 10_000, 7, (0.0, 1.0)).map_err(|e| e.to_string())?;
    let reproducible = a.to_string() == b.to_string();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut g = [[0.0; 3]; 2];
        let mut bm = [[0.0; 3]; 3];
        for v in g.iter_mut().flatten().chain(bm.iter_mut().flatten()) {
            *v = rng.random_range(-2.0..2.0);
        }
        let bm = tensor::sym(&bm);
        let (s, t) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let c = rng.random_range(0.0..1.0);
        let combo = tensor::add(&tensor::scale(s, &g[0]), &tensor::scale(t, &g[1]));
        let lhs = flux.flux(c, &combo, &bm);
        let q0 = flux.flux(c, &g[0], &bm);
        let q1 = flux.flux(c, &g[1], &bm);
        let rhs = tensor::add(&tensor::scale(s, &q0), &tensor::scale(t, &q1));
        let scale = s.abs() * tensor::norm(&q0) + t.abs() * tensor::norm(&q1);
        worst = worst.max(tensor::norm(&tensor::sub(&lhs, &rhs)) / scale);
    }
    let detail = format!(
        "growth {} monotone {} coercive {} flux {}; reproducible {reproducible}; flux linearity rel. {worst:.1e}",
        a.growth_ok, a.monotone_ok, a.coercive_ok, a.flux_ok
    );
    if a.all_pass() && reproducible && worst <= 1e-15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn inf_sup_discrimination() -> Check {
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for level in 1..=3 {
        let mesh = level_mesh(level);
        let v2 = Space::new(mesh.clone(), ElementKind::VectorP2);
        let p0 = Space::new(mesh.clone(), ElementKind::P0);
        stable.push(estimate_inf_sup(&v2, &p0, 0).map_err(|e| e.to_string())?);
        let v1 = Space::new(mesh.clone(), ElementKind::VectorP1);
        let p1d = Space::new(mesh, ElementKind::P1Discontinuous);
        unstable.push(
            estimate_inf_sup_with(&v1, &p1d, InfSupMode::Diagnostic, 0)
                .map_err(|e| e.to_string())?
                .beta,
        );
    }
    let (lo, hi) = stable
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &b| (l.min(b), h.max(b)));
    let spread = (hi - lo) / lo;
    let ratios: Vec<f64> = unstable.windows(2).map(|w| w[0] / w[1]).collect();
    let detail = format!(
        "P2/P0 beta {:?} (spread {:.1}%); P1/P1disc diagnostic beta {:?}, ratios {:?}",
        stable.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>(),
        100.0 * spread,
        unstable
            .iter()
            .map(|b| format!("{b:.4}"))
            .collect::<Vec<_>>(),
        ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
    );
    if spread < 0.15 && ratios.iter().all(|&r| r > 2.0) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Check {
    let mut devs = common::momentum_deviations(11);
    devs.extend(common::concentration_deviations(3));
    let worst = devs.iter().fold(0.0f64, |m, (_, d)| m.max(*d));
    let detail = devs
        .iter()
        .map(|(n, d)| format!("{n} {d:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let mut records = DivRecords::new();
    let c1 = skew_symmetry();
    let c3 = newtonian_rates(&mut records);
    let coupled = coupled_table(&mut records);
    let c4 = variable_exponent_convergence(&coupled);
    let c5 = energy_boundedness(&coupled);
    let c6 = regularization_sweep();
    let c7 = min_max_principle(&mut records);
    let c2 = incompressibility(&records);
    let c8 = luxembourg_oracle();
    let c9 = law_certification();
    let c10 = inf_sup_discrimination();
    let c11 = oracle_equivalence();
    let results = [
        (1, "skew-symmetry of the trilinear forms", c1),
        (2, "discrete incompressibility", c2),
        (3, "Newtonian MMS rates", c3),
        (4, "variable-exponent coupled MMS", c4),
        (5, "energy boundedness", c5),
        (6, "regularization sweep", c6),
        (7, "min/max principle", c7),
        (8, "Luxembourg norm oracle", c8),
        (9, "law certification", c9),
        (10, "inf-sup discrimination", c10),
        (11, "element matrix oracle equivalence", c11),
    ];
    let mut failed = 0;
    for (id, title, res) in &results {
        match res {
            Ok(detail) => println!("PASS {id:>2} {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {title}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
