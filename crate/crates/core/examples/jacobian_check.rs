//! Compares the adjoint Jacobian with central differences in a few random
//! directions on a small cylinder.
//!
//! `cargo run --release --example jacobian_check`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use dot_core::data::{stack, RetentionMask};
use dot_core::forward::ForwardModel;
use dot_core::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
use dot_core::sensitivity::{measurement_jacobian, LogParams};

fn main() -> dot_core::Result<()> {
    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.25)?;
    let layout = PatchLayout::CylinderRings {
        sources: 4,
        sensors: 4,
        patch_radius: 0.15,
        ring_heights: vec![0.3, 0.7],
    };
    let patches = define_patches(&mesh, &layout)?;
    let map = patches.free_nodes(&mesh);
    let mask = RetentionMask::full(4, 4);
    let model = ForwardModel::new(&mesh);
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut draw = |n: usize, a: f64| -> Vec<f64> { (0..n).map(|_| a * rng.random_range(-1.0..1.0)).collect() };

    let base = LogParams::from_beta(&draw(2 * map.len(), 0.2), 0.05, 0.5)?;
    for omega in [0.0, 0.021] {
        let jac = measurement_jacobian(&mesh, &patches, &base, omega, &mask)?.matrix;
        println!("omega/c = {omega}: Jacobian {} x {}", jac.rows(), jac.cols());
        let eval = |beta: &[f64]| -> dot_core::Result<Vec<f64>> {
            let p = LogParams::from_beta(beta, 0.05, 0.5)?;
            Ok(stack(&model.measure(&p.coefficients(&map, omega)?, &patches)?, &mask, true))
        };
        for _ in 0..3 {
            let d = draw(2 * map.len(), 1.0);
            let jd = jac.mul_vec(&d);
            let step = 1e-5;
            let at = |s: f64| -> Vec<f64> { base.beta().iter().zip(&d).map(|(b, di)| b + s * di).collect() };
            let (p, m) = (eval(&at(step))?, eval(&at(-step))?);
            let (mut num, mut den) = (0.0, 0.0);
            for ((a, b), j) in p.iter().zip(&m).zip(&jd) {
                num += ((a - b) / (2.0 * step) - j).powi(2);
                den += j * j;
            }
            println!("  relative difference {:.2e}", (num / den).sqrt());
        }
    }
    Ok(())
}
