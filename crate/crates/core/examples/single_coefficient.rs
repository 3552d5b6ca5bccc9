//! Reconstructs one coefficient while the other is known: absorption with
//! the diffusivity fixed, then diffusivity with the absorption fixed.
//!
//! `cargo run --release --example single_coefficient -- [sim_h] [recon_h]`

use dot_core::eval::{evaluate, Bands};
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::recon::{reconstruct, ReconConfig, Unknowns};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, CYLINDER_MASK_DISTANCE};

fn main() -> dot_core::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("numeric argument")).collect();
    let (sim_h, recon_h) = (args.first().copied().unwrap_or(0.1), args.get(1).copied().unwrap_or(0.14));

    let cyl = |h| generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h);
    let layout = PatchLayout::cylinder_default();
    let (fine, coarse) = (cyl(sim_h)?, cyl(recon_h)?);
    let (fine_patches, coarse_patches) = (define_patches(&fine, &layout)?, define_patches(&coarse, &layout)?);
    let mask = mask_nearest_sensors(&fine_patches, CYLINDER_MASK_DISTANCE)?;

    let cases = [
        (Preset::Case1Mu, Unknowns::Absorption { kappa: 0.05 }),
        (Preset::Case1Kappa, Unknowns::Diffusivity { mu: 0.5 }),
    ];
    for (preset, unknowns) in cases {
        let phantom = build_phantom(preset, &fine)?;
        let sim = simulate_measurements(&fine, &phantom, &fine_patches, 0.0, &mask, &NoiseModel::default())?;
        let config = ReconConfig {
            unknowns,
            ..ReconConfig::default()
        };
        let result = reconstruct(&sim.data, &coarse, &coarse_patches, &config)?;
        let report = evaluate(&result, &build_phantom(preset, &coarse)?, &coarse, Bands::default());
        let (field, p) = match unknowns {
            Unknowns::Absorption { .. } => ("mu", &report.mu),
            _ => ("kappa", &report.kappa),
        };
        println!(
            "{}: {:?} after {} linearizations; {field} max {:.4} min {:.4}, centroid error {}",
            preset.name(),
            result.termination,
            result.outer_residuals.len(),
            p.max,
            p.min,
            p.centroid_error.map_or("n/a".into(), |c| format!("{c:.3}"))
        );
    }
    Ok(())
}
