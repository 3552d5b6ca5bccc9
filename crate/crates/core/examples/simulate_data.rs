//! Simulates masked, noisy Case 2 measurements on a fine mesh and writes
//! the measurement file.
//!
//! `cargo run --release --example simulate_data -- [h] [omega_over_c] [seed] [out]`

use dot_core::io::{read_measurements, write_measurements};
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::sim::{build_phantom, mask_nearest_sensors, simulate_measurements, NoiseModel, Preset, CYLINDER_MASK_DISTANCE};

fn main() -> dot_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, d: f64| args.get(i).map_or(d, |s| s.parse().expect("numeric argument"));
    let (h, omega, seed) = (num(0, 0.1), num(1, 0.0), num(2, 1.0) as u64);
    let out = args.get(3).cloned().unwrap_or_else(|| std::env::temp_dir().join("case2.dat").display().to_string());

    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h)?;
    let patches = define_patches(&mesh, &PatchLayout::cylinder_default())?;
    let mask = mask_nearest_sensors(&patches, CYLINDER_MASK_DISTANCE)?;
    let phantom = build_phantom(Preset::Case2, &mesh)?;
    let noise = NoiseModel {
        seed,
        ..NoiseModel::default()
    };
    let sim = simulate_measurements(&mesh, &phantom, &patches, omega, &mask, &noise)?;
    println!(
        "{} nodes, {} retained pairs, {} real entries, expected noise norm {:.3}",
        mesh.node_count(),
        mask.len(),
        sim.data.len(),
        (sim.data.len() as f64).sqrt()
    );
    let misfit = sim.data.whitened_misfit(&sim.exact);
    println!("whitened noise norm of this draw {misfit:.3}");

    write_measurements(&out, &sim.data)?;
    let back = read_measurements(&out)?;
    assert_eq!(back.values, sim.data.values);
    println!("wrote {out}");
    Ok(())
}
