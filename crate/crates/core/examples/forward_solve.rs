//! Solves the diffusion forward problem for the Case 2 phantom and prints
//! part of the measurement matrix, unmodulated and modulated.
//!
//! `cargo run --release --example forward_solve -- [h]`

use dot_core::forward::ForwardModel;
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::sim::{build_phantom, Preset};

fn main() -> dot_core::Result<()> {
    let h: f64 = std::env::args().nth(1).map_or(Ok(0.12), |s| s.parse()).expect("h must be a number");
    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h)?;
    let patches = define_patches(&mesh, &PatchLayout::cylinder_default())?;
    let phantom = build_phantom(Preset::Case2, &mesh)?;
    let model = ForwardModel::new(&mesh);
    println!("{} nodes, {} sources, {} sensors", mesh.node_count(), patches.source_count(), patches.sensor_count());

    for omega in [0.0, 0.021] {
        let start = std::time::Instant::now();
        let m = model.measure(&phantom.coefficients(&mesh, omega)?, &patches)?;
        println!("omega/c = {omega}: {:.2}s", start.elapsed().as_secs_f64());
        // Source 0 against every fourth sensor: amplitude decays with distance.
        for j in (0..m.sensors()).step_by(4) {
            let v = m.get(j, 0);
            println!("  M[{j:2}, 0] = {:.6e} {:+.6e}i  |M| {:.4e}  phase {:+.4e}", v.re, v.im, v.norm(), v.arg());
        }
    }
    Ok(())
}
