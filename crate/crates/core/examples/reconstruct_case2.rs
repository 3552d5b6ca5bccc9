//! Simultaneous reconstruction of absorption and diffusivity from
//! unmodulated data: simulate on a fine mesh, estimate the background and
//! reconstruct on a coarser one, then evaluate against the phantom.
//!
//! `cargo run --release --example reconstruct_case2 -- [sim_h] [recon_h]`
//! The acceptance run uses 0.075 and 0.1; the defaults finish in about a
//! minute.

use dot_core::eval::{evaluate, Bands};
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::recon::{reconstruct, ReconConfig};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, CYLINDER_MASK_DISTANCE};

fn main() -> dot_core::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("numeric argument")).collect();
    let (sim_h, recon_h) = (args.first().copied().unwrap_or(0.1), args.get(1).copied().unwrap_or(0.14));

    let cyl = |h| generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h);
    let layout = PatchLayout::cylinder_default();
    let (fine, coarse) = (cyl(sim_h)?, cyl(recon_h)?);
    let (fine_patches, coarse_patches) = (define_patches(&fine, &layout)?, define_patches(&coarse, &layout)?);
    let mask = mask_nearest_sensors(&fine_patches, CYLINDER_MASK_DISTANCE)?;
    let phantom = build_phantom(Preset::Case2, &fine)?;
    let noise = NoiseModel {
        seed: 1,
        ..NoiseModel::default()
    };
    let sim = simulate_measurements(&fine, &phantom, &fine_patches, 0.0, &mask, &noise)?;

    let start = std::time::Instant::now();
    let result = reconstruct(&sim.data, &coarse, &coarse_patches, &ReconConfig::default())?;
    println!("reconstruction on {} nodes took {:.1}s", coarse.node_count(), start.elapsed().as_secs_f64());
    if let Some(b) = &result.background {
        println!("background kappa0 {:.4} mu0 {:.4}", b.kappa0, b.mu0);
    }
    println!("target residual {:.3}", result.tau * result.epsilon);
    println!("outer 0 residual {:.3}", result.initial_residual);
    for (l, (r, round)) in result.outer_residuals.iter().zip(&result.lsqr_rounds).enumerate() {
        println!("outer {} residual {r:.3} after {} LSQR steps", l + 1, round.iterations);
    }
    println!("termination {:?}", result.termination);

    let truth = build_phantom(Preset::Case2, &coarse)?;
    print!("{}", evaluate(&result, &truth, &coarse, Bands::default()));
    Ok(())
}
