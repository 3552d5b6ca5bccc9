//! The `dot` binary end to end: file formats, exit codes and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dot_core::config::RunConfig;
use dot_core::io::{read_measurements, write_solution, Solution};
use dot_core::mesh::load_msh;
use dot_core::sim::{build_phantom, Preset};

fn dot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dot"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

/// A coarse cylinder with the default patch layout.
fn setup(dir: &Path) -> PathBuf {
    std::fs::write(
        dir.join("run.cfg"),
        "domain=cylinder\nh=0.15\npreset=case2\nnoise_rel=0.01\n",
    )
    .unwrap();
    ok(dot(dir, &["mesh-gen", "--config", "run.cfg", "--out", "cyl.msh"]));
    dir.join("cyl.msh")
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    for out in ["a.dat", "b.dat"] {
        ok(dot(dir, &["simulate", "--config", "run.cfg", "--mesh", "cyl.msh", "--seed", "7", "--out", out]));
    }
    let a = std::fs::read(dir.join("a.dat")).unwrap();
    assert_eq!(a, std::fs::read(dir.join("b.dat")).unwrap());
    ok(dot(dir, &["simulate", "--config", "run.cfg", "--mesh", "cyl.msh", "--seed", "8", "--out", "c.dat"]));
    assert_ne!(a, std::fs::read(dir.join("c.dat")).unwrap());

    let data = read_measurements(dir.join("a.dat")).unwrap();
    assert_eq!(data.omega_over_c, 0.0);
    assert!(!data.is_empty());
}

#[test]
fn reconstruct_reaches_the_discrepancy_level() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(dot(dir, &["simulate", "--config", "run.cfg", "--mesh", "cyl.msh", "--seed", "3", "--out", "m.dat"]));
    ok(dot(
        dir,
        &[
            "reconstruct",
            "--config",
            "run.cfg",
            "--mesh",
            "cyl.msh",
            "--set",
            "data=m.dat",
            "--set",
            "background_kappa=0.05",
            "--set",
            "background_mu=0.5",
            "--out",
            "sol.txt",
        ],
    ));
    let log = std::fs::read_to_string(dir.join("sol.txt.log")).unwrap();
    let target: f64 = log.lines().next().unwrap().strip_prefix("# target ").unwrap().parse().unwrap();
    let last_outer: f64 = log
        .lines()
        .filter(|l| l.starts_with("outer "))
        .last()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(last_outer <= target, "{last_outer} > {target}");
    assert!(log.lines().any(|l| l.starts_with("lsqr 1 0 residual ")));

    // The effective config reproduces the run.
    let effective = RunConfig::load(dir.join("sol.txt.config")).unwrap();
    assert_eq!(effective.background_kappa, Some(0.05));
    ok(dot(dir, &["reconstruct", "--config", "sol.txt.config", "--out", "again.txt"]));
    assert_eq!(
        std::fs::read(dir.join("sol.txt")).unwrap(),
        std::fs::read(dir.join("again.txt")).unwrap()
    );

    ok(dot(dir, &["export-vtk", "--config", "run.cfg", "--mesh", "cyl.msh", "--set", "solution=sol.txt", "--out", "sol.vtk"]));
    let vtk = std::fs::read_to_string(dir.join("sol.vtk")).unwrap();
    assert!(vtk.contains("SCALARS absorption") && vtk.contains("SCALARS diffusivity"));
}

#[test]
fn evaluate_on_the_truth_reports_zero_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mesh_path = setup(dir);
    let mesh = load_msh(&mesh_path).unwrap();
    let (kappa, mu) = build_phantom(Preset::Case2, &mesh).unwrap().evaluate(&mesh);
    let truth = Solution {
        mesh_hash: mesh.content_hash(),
        kappa0: 0.05,
        mu0: 0.5,
        kappa,
        mu,
        converged: true,
        linearizations: 0,
        final_residual: 0.0,
        target: 0.0,
    };
    write_solution(dir.join("truth.txt"), &truth).unwrap();
    ok(dot(dir, &["evaluate", "--config", "run.cfg", "--mesh", "cyl.msh", "--set", "solution=truth.txt", "--out", "report.txt"]));
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    let value = |key: &str| -> f64 {
        let line = report.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
        line.split_once('=').unwrap().1.parse().unwrap()
    };
    for p in ["kappa", "mu"] {
        assert_eq!(value(&format!("{p}.centroid_error")), 0.0, "{report}");
        assert_eq!(value(&format!("{p}.cross_talk")), 0.0, "{report}");
    }
}

#[test]
fn errors_are_single_tagged_lines_with_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = dot(dir, &["simulate", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with("error[")).unwrap();
    assert!(line.starts_with("error[config]:"), "{line}");

    let o = dot(dir, &["simulate", "--mesh", "missing.msh", "--out", "x.dat"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).lines().any(|l| l.starts_with("error[io]:")));
}
