//! Priorconditioned LSQR on a small deblurring problem: a one-dimensional
//! signal with a jump, a Gaussian blur, noise, and a discrete Laplacian
//! prior supplied through `PriorSolve`.
//!
//! `cargo run --release --example lsqr_priorconditioned`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use dot_core::krylov::{priorconditioned_lsqr_with, LinearizedSystem, LsqrOptions, PriorSolve};
use dot_core::linalg::RowMatrix;

/// `H = D + δI` with `D` the Dirichlet second-difference matrix, solved by
/// the tridiagonal algorithm.
struct Laplacian {
    n: usize,
    shift: f64,
}

impl PriorSolve for Laplacian {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve(&self, x: &[f64]) -> Vec<f64> {
        let (n, d) = (self.n, 2.0 + self.shift);
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            let m = d + if i > 0 { c[i - 1] } else { 0.0 };
            c[i] = -1.0 / m;
            y[i] = (x[i] + if i > 0 { y[i - 1] } else { 0.0 }) / m;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    }
}

fn main() -> dot_core::Result<()> {
    let n = 80;
    let truth: Vec<f64> = (0..n).map(|i| if (25..50).contains(&i) { 1.0 } else { 0.2 }).collect();
    let width = 3.0;
    let a = RowMatrix::from_fn(n, n, |i, j| {
        let d = i as f64 - j as f64;
        (-0.5 * d * d / (width * width)).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
    });
    let sigma = 0.01;
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let y: Vec<f64> = a
        .mul_vec(&truth)
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    // Whitened data: the expected noise norm is √n.
    let a = RowMatrix::from_fn(n, n, |i, j| a.get(i, j) / sigma);
    let y: Vec<f64> = y.iter().map(|v| v / sigma).collect();

    let prior = Laplacian { n, shift: 1e-3 };
    let system = LinearizedSystem::new(a, y, &prior)?;
    let target = 1.3 * (n as f64).sqrt();
    let mut opts = LsqrOptions::new(target, 100);
    opts.record_iterates = true;
    let r = priorconditioned_lsqr_with(&system, &opts)?;
    println!("stopped by {:?} after {} steps, residual {:.3} (target {target:.3})", r.stopped_by, r.iterations, r.final_residual());
    for (m, x) in r.iterates.iter().enumerate() {
        let err: f64 = x.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("  step {:2}: residual {:8.3}  error {:.3}", m + 1, r.residual_history[m + 1], err);
    }
    Ok(())
}
