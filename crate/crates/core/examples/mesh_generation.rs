//! Generates the cylinder and ball domains, checks them and writes MSH files.
//!
//! `cargo run --release --example mesh_generation -- [h] [out_dir]`

use std::collections::BTreeMap;

use dot_core::mesh::{define_patches, generate_primitive, validate, write_msh, PatchLayout, Shape};

fn main() -> dot_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().map_or(Ok(0.15), |s| s.parse()).expect("h must be a number");
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| std::env::temp_dir().display().to_string()));

    let cases = [
        ("cylinder", Shape::Cylinder { radius: 1.0, height: 1.0 }, h, PatchLayout::cylinder_default()),
        ("ball", Shape::Ball { radius: 10.0 }, 10.0 * h, PatchLayout::ball_default()),
    ];
    for (name, shape, h, layout) in cases {
        let mesh = generate_primitive(shape, h)?;
        let patches = define_patches(&mesh, &layout)?;
        let report = validate(&mesh, Some(&patches));
        println!(
            "{name}: {} nodes, {} tets, {} boundary facets, volume {:.4} of {:.4}, closure {:.1e}, valid {}",
            report.node_count,
            report.tet_count,
            report.boundary_facet_count,
            report.total_volume,
            shape.volume(),
            report.closure_error,
            report.is_valid()
        );

        // Physical group 1 is the boundary, then one group per patch.
        let mut groups = BTreeMap::new();
        groups.insert(1, mesh.boundary_facets().to_vec());
        for (i, p) in patches.sources.iter().chain(&patches.sensors).enumerate() {
            groups.insert(100 + i as i64, p.facets.iter().map(|&f| mesh.boundary_facets()[f]).collect());
        }
        let path = out.join(format!("{name}.msh"));
        write_msh(&path, &mesh, &groups)?;
        println!("  wrote {} with {} patches", path.display(), groups.len() - 1);
    }
    Ok(())
}
