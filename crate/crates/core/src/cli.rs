//! Subcommands of the `dot` driver.
//!
//! Each command reads its inputs from a [`RunConfig`], writes its artifacts
//! and an effective-config file next to `out`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_fields, ConvergenceSummary, EvalReport};
use crate::io::{self, Solution};
use crate::mesh::{define_patches, generate_primitive, load_msh, write_msh, Mesh, PatchSet};
use crate::recon::{estimate_background_with, reconstruct};
use crate::sim::{build_phantom, mask_nearest_sensors, simulate_measurements};
use crate::vtk::export_vtk;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MeshGen,
    Simulate,
    Reconstruct,
    ExportVtk,
    Evaluate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MeshGen => "mesh-gen",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::ExportVtk => "export-vtk",
            Command::Evaluate => "evaluate",
        }
    }
}

/// `path` with `suffix` appended to its file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Single-line error report, `error[tag]: message`.
pub fn error_line(e: &Error) -> String {
    format!("error[{}]: {}", e.tag(), e.to_string().replace('\n', " "))
}

pub fn run(command: Command, config: &RunConfig) -> Result<()> {
    match command {
        Command::MeshGen => mesh_gen(config),
        Command::Simulate => simulate(config),
        Command::Reconstruct => reconstruct_cmd(config),
        Command::ExportVtk => export(config),
        Command::Evaluate => evaluate_cmd(config).map(|_| ()),
    }
}

fn out(config: &RunConfig) -> Result<&Path> {
    config.require(&config.out, "out")
}

fn write_effective(config: &RunConfig) -> Result<()> {
    let path = sidecar(out(config)?, ".config");
    std::fs::write(&path, config.to_text()).map_err(|e| Error::io(&path, e))
}

fn mesh_and_patches(config: &RunConfig, path: &Path) -> Result<(Mesh, PatchSet)> {
    let mesh = load_msh(path)?;
    let patches = define_patches(&mesh, &config.layout())?;
    Ok((mesh, patches))
}

fn mesh_gen(config: &RunConfig) -> Result<()> {
    let mesh = generate_primitive(config.shape(), config.h)?;
    log::info!("generated {} nodes, {} tets", mesh.node_count(), mesh.tets().len());
    let mut groups = BTreeMap::new();
    groups.insert(1, mesh.boundary_facets().to_vec());
    write_msh(out(config)?, &mesh, &groups)?;
    write_effective(config)
}

fn simulate(config: &RunConfig) -> Result<()> {
    let (mesh, patches) = mesh_and_patches(config, config.require(&config.mesh, "mesh")?)?;
    let mask = mask_nearest_sensors(&patches, config.mask_distance())?;
    let phantom = build_phantom(config.preset, &mesh)?;
    let sim = simulate_measurements(&mesh, &phantom, &patches, config.omega_over_c, &mask, &config.noise())?;
    log::info!("{} retained pairs, {} real entries", mask.len(), sim.data.len());
    io::write_measurements(out(config)?, &sim.data)?;
    write_effective(config)
}

fn reconstruct_cmd(config: &RunConfig) -> Result<()> {
    let out = out(config)?;
    let (mesh, patches) = mesh_and_patches(config, config.require(&config.mesh, "mesh")?)?;
    let data = io::read_measurements(config.require(&config.data, "data")?)?;
    let mut recon = config.recon()?;
    let mut effective = config.clone();
    if let (Some(path), None) = (&config.background_mesh, recon.background) {
        let (bg_mesh, bg_patches) = mesh_and_patches(config, path)?;
        let e = estimate_background_with(&data, &bg_mesh, &bg_patches, recon.unknowns)?;
        log::info!("background on {}: kappa0 {:e} mu0 {:e}", path.display(), e.kappa0, e.mu0);
        recon.background = Some((e.kappa0, e.mu0));
        effective.background_kappa = Some(e.kappa0);
        effective.background_mu = Some(e.mu0);
    }
    let result = reconstruct(&data, &mesh, &patches, &recon)?;
    if let Some(e) = &result.background {
        effective.background_kappa = Some(e.kappa0);
        effective.background_mu = Some(e.mu0);
    }
    io::write_solution(out, &Solution::from_result(&result, &mesh))?;
    io::write_convergence_log(sidecar(out, ".log"), &result)?;
    // The effective config pins the background, so a rerun skips the fit.
    write_effective(&effective)
}

fn load_solution(config: &RunConfig) -> Result<(Mesh, Solution)> {
    let mesh = load_msh(config.require(&config.mesh, "mesh")?)?;
    let sol = io::read_solution(config.require(&config.solution, "solution")?)?;
    sol.check_mesh(&mesh)?;
    Ok((mesh, sol))
}

fn export(config: &RunConfig) -> Result<()> {
    let (mesh, sol) = load_solution(config)?;
    export_vtk(&mesh, &sol.kappa, &sol.mu, out(config)?)?;
    write_effective(config)
}

/// Writes the report to `out` when set and returns it.
pub fn evaluate_cmd(config: &RunConfig) -> Result<EvalReport> {
    let (mesh, sol) = load_solution(config)?;
    let truth = build_phantom(config.preset, &mesh)?;
    let mut report = evaluate_fields(&mesh, &sol.kappa, &sol.mu, (sol.kappa0, sol.mu0), &truth, config.bands());
    report.convergence = Some(ConvergenceSummary {
        converged: sol.converged,
        linearizations: sol.linearizations,
        final_residual: sol.final_residual,
        target: sol.target,
    });
    match &config.out {
        Some(path) => {
            std::fs::write(path, report.to_string()).map_err(|e| Error::io(path, e))?;
            write_effective(config)?;
        }
        None => print!("{report}"),
    }
    Ok(report)
}
