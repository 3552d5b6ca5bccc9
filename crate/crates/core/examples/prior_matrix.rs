//! Builds the lagged-diffusivity prior matrix for a field with a sharp
//! edge and shows how the Perona–Malik weight switches off across it.
//!
//! `cargo run --release --example prior_matrix`

use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::prior::{evaluate_r, pm_r, PriorModel};

fn main() -> dot_core::Result<()> {
    let threshold = 5e-3;
    println!("weight r'(t)/t for T = {threshold}:");
    for t in [0.0, 1e-3, 5e-3, 2e-2, 1e-1, 1.0] {
        let (r, _, w) = pm_r(t, threshold);
        println!("  t = {t:7.0e}  r = {r:.3e}  weight = {w:.3e}");
    }

    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.15)?;
    let patches = define_patches(&mesh, &PatchLayout::cylinder_default())?;
    let map = patches.free_nodes(&mesh);
    let model = PriorModel::new(&mesh, map.clone())?;

    // A step of height 1 across the plane x = 0.
    let step: Vec<f64> = map.free_nodes().iter().map(|&n| if mesh.vertices()[n][0] > 0.0 { 1.0 } else { 0.0 }).collect();
    let smooth: Vec<f64> = map.free_nodes().iter().map(|&n| 0.5 * (1.0 + mesh.vertices()[n][0])).collect();
    for (name, u) in [("step", &step), ("ramp", &smooth)] {
        let h = model.h(u, threshold);
        let r = evaluate_r(&mesh, &map.scatter(u), threshold);
        let hu = h.mul_vec(u);
        let quad: f64 = u.iter().zip(&hu).map(|(a, b)| a * b).sum();
        println!("{name}: R(u) = {r:.4e}, u'H(u)u = {quad:.4e}, nnz {}", h.pattern().nnz());
    }
    Ok(())
}
