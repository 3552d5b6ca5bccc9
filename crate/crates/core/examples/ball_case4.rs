//! Ball of radius 10 with 32 sources and 60 sensors and twisted inclusions
//! in both coefficients, reconstructed from modulated data.
//!
//! `cargo run --release --example ball_case4 -- [sim_h] [recon_h]`
//! The defaults take about ten minutes. At this resolution the coarse-mesh
//! discretization error exceeds the noise, so the discrepancy level is not
//! reached and spikes appear next to the patches. Finer meshes reduce both.

use dot_core::eval::{evaluate, Bands};
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::recon::{reconstruct, ReconConfig};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, BALL_MASK_DISTANCE};

fn main() -> dot_core::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("numeric argument")).collect();
    let (sim_h, recon_h) = (args.first().copied().unwrap_or(1.0), args.get(1).copied().unwrap_or(1.3));

    let ball = |h| generate_primitive(Shape::Ball { radius: 10.0 }, h);
    let layout = PatchLayout::ball_default();
    let (fine, coarse) = (ball(sim_h)?, ball(recon_h)?);
    let (fine_patches, coarse_patches) = (define_patches(&fine, &layout)?, define_patches(&coarse, &layout)?);
    let mask = mask_nearest_sensors(&fine_patches, BALL_MASK_DISTANCE)?;
    let phantom = build_phantom(Preset::Case4, &fine)?;
    let sim = simulate_measurements(&fine, &phantom, &fine_patches, 0.0126, &mask, &NoiseModel::default())?;
    println!("{} + {} nodes, {} real entries", fine.node_count(), coarse.node_count(), sim.data.len());

    let config = ReconConfig {
        tau: 1.6,
        ..ReconConfig::default()
    };
    let result = reconstruct(&sim.data, &coarse, &coarse_patches, &config)?;
    println!("{:?} after {} linearizations", result.termination, result.outer_residuals.len());
    let truth = build_phantom(Preset::Case4, &coarse)?;
    print!("{}", evaluate(&result, &truth, &coarse, Bands { kappa: 0.01, mu: 0.01 }));
    Ok(())
}
