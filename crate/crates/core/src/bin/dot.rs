use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dot_core::cli::{self, Command};
use dot_core::config::RunConfig;
use dot_core::Result;

#[derive(Parser)]
#[command(name = "dot", version, about = "Diffuse optical tomography with edge-preferring priors")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides one key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Mesh file (Gmsh MSH 2.2); same as `--set mesh=PATH`.
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,
    /// Output path of the command's main artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed; same as `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate a cylinder or ball mesh.
    MeshGen,
    /// Simulate noisy measurements of a preset phantom.
    Simulate,
    /// Reconstruct absorption and diffusivity from a measurement file.
    Reconstruct,
    /// Export a solution file to legacy VTK.
    ExportVtk,
    /// Compare a solution with its preset phantom.
    Evaluate,
}

fn config(args: &Args) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for pair in &args.set {
        c.set_pair(pair)?;
    }
    if let Some(m) = &args.mesh {
        c.mesh = Some(m.clone());
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let command = match args.command {
        Cmd::MeshGen => Command::MeshGen,
        Cmd::Simulate => Command::Simulate,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::ExportVtk => Command::ExportVtk,
        Cmd::Evaluate => Command::Evaluate,
    };
    match config(&args).and_then(|c| cli::run(command, &c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
