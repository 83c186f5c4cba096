use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vpflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn quiescent_solve_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpflow(&[
        "solve",
        "--scenario",
        "quiescent",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("iter,res_mom,res_conc,dU_rel,dC_rel,E_visc,E_stress,E_reg,E_grad_c")
    );
    assert_eq!(lines.count(), 1);
    let minmax = fs::read_to_string(dir.path().join("minmax.txt")).unwrap();
    assert!(minmax.contains("violation = 0e0"), "{minmax}");
    for f in ["config.toml", "energy.txt", "solution.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn mms_stokes2d_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpflow(&[
        "mms",
        "--preset",
        "stokes2d",
        "--levels",
        "4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("eoc.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "level,h,err_u_W1rm,err_u_lux,err_p,err_c_W12,err_c_L2,eoc_u,eoc_p,eoc_c"
    );
    assert_eq!(lines.len(), 5);
    let eoc_u: f64 = lines[4].split(',').nth(7).unwrap().parse().unwrap();
    assert!((1.9..=2.1).contains(&eoc_u), "{eoc_u}");
}

#[test]
fn certification_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = vpflow(&[
            "certify-laws",
            "--samples",
            "10000",
            "--seed",
            "7",
            "--out",
            path(d.path()),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = fs::read(a.path().join("cert.txt")).unwrap();
    let rb = fs::read(b.path().join("cert.txt")).unwrap();
    assert_eq!(ra, rb);
    assert!(String::from_utf8(ra).unwrap().contains("seed = 7"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let out = vpflow(&["solve", "--scenario", "vortex", "--out", path(first.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let second = tempfile::tempdir().unwrap();
    let echo = first.path().join("config.toml");
    let out = vpflow(&["run", "--config", path(&echo), "--out", path(second.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "energy.txt", "minmax.txt", "solution.txt"] {
        let a = fs::read(first.path().join(f)).unwrap();
        let b = fs::read(second.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn config_errors_exit_1_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[solver]\nouter_tol = 1e-8\nouter_maxitt = 3\n").unwrap();
    let out = vpflow(&["solve", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("outer_maxitt") && err.contains("line 3"),
        "{err}"
    );

    fs::write(&cfg, "[law]\nr_minus = 1.2\n").unwrap();
    let out = vpflow(&["solve", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("law."));

    let out = vpflow(&["mms", "--preset", "poiseuille", "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn nonconvergence_exits_2_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(
        &cfg,
        "command = \"solve\"\n[data]\nswirl = 50.0\n[data.boundary_c]\nkind = \"preset\"\nname = \"vortex\"\n[solver]\nouter_maxit = 1\n",
    )
    .unwrap();
    let out = vpflow(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn sweep_and_infsup_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpflow(&["sweep-k", "--k", "10,100", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,E_reg,dist_prev"));
    assert_eq!(csv.lines().count(), 3);

    let out = vpflow(&["infsup", "--levels", "2", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("infsup.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let beta: f64 = csv
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(beta > 0.3, "{beta}");
}

#[test]
fn run_needs_a_command_and_it_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = vpflow(&["run", "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "command = \"mms\"\n").unwrap();
    let out = vpflow(&["solve", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
}
