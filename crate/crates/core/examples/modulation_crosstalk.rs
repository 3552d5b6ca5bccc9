//! Reconstructs the Case 2 phantom from unmodulated and from modulated data
//! with the same noise seed and compares the cross-talk indices.
//!
//! `cargo run --release --example modulation_crosstalk -- [sim_h] [recon_h]`

use dot_core::eval::{evaluate, Bands};
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::recon::{reconstruct, ReconConfig};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, CYLINDER_MASK_DISTANCE};

fn main() -> dot_core::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("numeric argument")).collect();
    let (sim_h, recon_h) = (args.first().copied().unwrap_or(0.1), args.get(1).copied().unwrap_or(0.14));

    let cyl = |h| generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h);
    let layout = PatchLayout::cylinder_default();
    let (fine, coarse) = (cyl(sim_h)?, cyl(recon_h)?);
    let (fine_patches, coarse_patches) = (define_patches(&fine, &layout)?, define_patches(&coarse, &layout)?);
    let mask = mask_nearest_sensors(&fine_patches, CYLINDER_MASK_DISTANCE)?;
    let phantom = build_phantom(Preset::Case2, &fine)?;
    let truth = build_phantom(Preset::Case2, &coarse)?;
    let noise = NoiseModel {
        seed: 1,
        ..NoiseModel::default()
    };

    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    for omega in [0.0, 0.021] {
        let sim = simulate_measurements(&fine, &phantom, &fine_patches, omega, &mask, &noise)?;
        let result = reconstruct(&sim.data, &coarse, &coarse_patches, &ReconConfig::default())?;
        let report = evaluate(&result, &truth, &coarse, Bands::default());
        println!(
            "omega/c = {omega}: {} entries, {:?} after {} linearizations",
            sim.data.len(),
            result.termination,
            result.outer_residuals.len()
        );
        println!(
            "  cross-talk kappa {} mu {}; peak fraction kappa {} mu {}",
            show(report.kappa.cross_talk),
            show(report.mu.cross_talk),
            show(report.kappa.peak_fraction),
            show(report.mu.peak_fraction)
        );
    }
    Ok(())
}
