//! Writes the Case 2 phantom and a reconstruction to legacy VTK files for
//! viewing in ParaView or VisIt.
//!
//! `cargo run --release --example export_vtk -- [out_dir]`

use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::recon::{reconstruct, ReconConfig};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, CYLINDER_MASK_DISTANCE};
use dot_core::vtk::{export_vtk, read_vtk};

fn main() -> dot_core::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.12)?;
    let patches = define_patches(&mesh, &PatchLayout::cylinder_default())?;
    let phantom = build_phantom(Preset::Case2, &mesh)?;

    let (kappa, mu) = phantom.evaluate(&mesh);
    let truth_path = out.join("case2_truth.vtk");
    export_vtk(&mesh, &kappa, &mu, &truth_path)?;
    println!("wrote {}", truth_path.display());

    // Inverse-crime reconstruction with the background given, for speed.
    let mask = mask_nearest_sensors(&patches, CYLINDER_MASK_DISTANCE)?;
    let sim = simulate_measurements(&mesh, &phantom, &patches, 0.021, &mask, &NoiseModel::default())?;
    let config = ReconConfig {
        background: Some((0.05, 0.5)),
        ..ReconConfig::default()
    };
    let result = reconstruct(&sim.data, &mesh, &patches, &config)?;
    let recon_path = out.join("case2_recon.vtk");
    export_vtk(&mesh, &result.kappa_field, &result.mu_field, &recon_path)?;
    let grid = read_vtk(&recon_path)?;
    println!(
        "wrote {} ({} points, {} cells, {:?})",
        recon_path.display(),
        grid.points.len(),
        grid.cells.len(),
        result.termination
    );
    Ok(())
}
