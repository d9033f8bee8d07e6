use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgs-fem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn l2_of(out: &Output) -> f64 {
    let text = stdout(out);
    let line = text.lines().find(|l| l.starts_with("l2_error")).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn tau_prints_closed_form_value() {
    let out = run(&[
        "tau", "--D", "1.0404", "--U", "0.51", "--mu", "0.01", "--h", "0.1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let tau: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("tau = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((tau - 4.1365e-3).abs() < 1e-7);
    assert!(text.contains("Q   = ") && text.contains("R   = "));
}

#[test]
fn convergence_writes_one_row_per_level() {
    let out = run(&[
        "convergence",
        "--case",
        "case1",
        "--method",
        "sgs",
        "--levels",
        "10,20",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("10,sgs,"));
    assert!(rows[1].starts_with("20,sgs,"));
}

#[test]
fn convergence_to_file_and_tau_override() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("sgs0.csv");
    let b = dir.path().join("galerkin.csv");
    let base = ["convergence", "--case", "case2", "--levels", "5,10"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend([
        "--method",
        "sgs",
        "--tau-override",
        "0",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(run(&args).status.success());
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--method", "galerkin", "--out", b.to_str().unwrap()]);
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn sgs_beats_galerkin_on_coarse_case2_mesh() {
    let gal = run(&[
        "solve", "--case", "case2", "--method", "galerkin", "--levels", "10",
    ]);
    let sgs = run(&[
        "solve", "--case", "case2", "--method", "sgs", "--levels", "10",
    ]);
    assert!(gal.status.success() && sgs.status.success());
    assert!(l2_of(&sgs) < l2_of(&gal));
}

#[test]
fn solve_exports_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let out = run(&["solve", "--levels", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 25);
    assert!(dir.path().join("c.vtk").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "case = case2\nmethod = galerkin\nlevels = 4,8,16\n").unwrap();
    let out = run(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--levels",
        "4,8",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# case=case2"));
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        2
    );
    assert!(text.contains("\n8,galerkin,"));
}

#[test]
fn dmp_check_and_estimate_run() {
    let out = run(&["dmp-check", "--levels", "6"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("galerkin")));
    assert!(text.lines().any(|l| l.starts_with("sgs")));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("residuals.csv");
    let out = run(&["estimate", "--levels", "5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("effectivity"));
    // Header plus 2 n^2 elements.
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 51);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["convergence", "--method", "upwind"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_nonzero_with_message() {
    let out = run(&["convergence", "--levels", "20,10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
    let out = run(&["solve", "--levels", "4,8"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["tau", "--D", "0", "--U", "1", "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}
