//! Independent oracles shared by the integration tests and the acceptance
//! run. Each returns an error measure; callers pick the tolerance.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use dot_core::data::{stack, RetentionMask};
use dot_core::forward::{compute_measurements, measurements_via_duals, ForwardModel, GAMMA};
use dot_core::krylov::{priorconditioned_lsqr_with, LinearizedSystem, LsqrOptions, LsqrResult, PriorSolve};
use dot_core::linalg::{RowMatrix, SparseMatrix};
use dot_core::mesh::{define_patches, generate_primitive, FreeNodeMap, Mesh, PatchLayout, PatchSet, Shape};
use dot_core::prior::{evaluate_r, PriorModel};
use dot_core::sensitivity::{born_perturbation, measurement_jacobian, LogParams};
use dot_core::sim::{add_noise, NoiseModel};

pub const THRESHOLD: f64 = 5e-3;

/// Unit cylinder with `k` sources and `k` sensors on the given rings.
pub fn cylinder(h: f64, k: usize, patch_radius: f64, ring_heights: &[f64]) -> (Mesh, PatchSet) {
    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h).unwrap();
    let layout = PatchLayout::CylinderRings {
        sources: k,
        sensors: k,
        patch_radius,
        ring_heights: ring_heights.to_vec(),
    };
    let ps = define_patches(&mesh, &layout).unwrap();
    (mesh, ps)
}

/// The four-by-four setup of the Jacobian and reciprocity checks.
pub fn small_cylinder() -> (Mesh, PatchSet) {
    cylinder(0.25, 4, 0.15, &[0.3, 0.7])
}

pub fn random(rng: &mut ChaCha20Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| a * rng.random_range(-1.0..1.0)).collect()
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

/// Worst relative errors of `J d` against central differences and the
/// Born linearization over `directions` random directions.
pub fn jacobian_errors(mesh: &Mesh, ps: &PatchSet, omega: f64, seed: u64, directions: usize) -> (f64, f64) {
    let map = ps.free_nodes(mesh);
    let n = map.len();
    let (k, j) = (ps.source_count(), ps.sensor_count());
    let mask = RetentionMask::full(k, j);
    let model = ForwardModel::new(mesh);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let base = LogParams::from_beta(&random(&mut rng, 2 * n, 0.2), 0.05, 0.5).unwrap();
    let coeff = base.coefficients(&map, omega).unwrap();
    let fields = model.fields(&coeff, ps).unwrap();
    let jac = measurement_jacobian(mesh, ps, &base, omega, &mask).unwrap().matrix;
    let eval = |beta: &[f64]| {
        let q = LogParams::from_beta(beta, 0.05, 0.5).unwrap();
        stack(&model.measure(&q.coefficients(&map, omega).unwrap(), ps).unwrap(), &mask, true)
    };
    let (mut worst_fd, mut worst_born) = (0.0f64, 0.0f64);
    for _ in 0..directions {
        let d = random(&mut rng, 2 * n, 1.0);
        let jd = jac.mul_vec(&d);

        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> { base.beta().iter().zip(&d).map(|(b, di)| b + s * di).collect() };
        let (p, m) = (eval(&shifted(h)), eval(&shifted(-h)));
        let fd: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        worst_fd = worst_fd.max(rel(&jd, &fd));

        // Born: δκ = κ ∘ dς, δμ = μ ∘ dv on free nodes, zero on S.
        let mut tk = vec![0.0; mesh.node_count()];
        let mut tm = vec![0.0; mesh.node_count()];
        for (i, &node) in map.free_nodes().iter().enumerate() {
            tk[node] = coeff.kappa[node] * d[i];
            tm[node] = coeff.mu[node] * d[n + i];
        }
        let mut re = Vec::new();
        let mut im = Vec::new();
        for &(k, j) in mask.pairs() {
            let dphi = born_perturbation(&model, &coeff, &fields.phi[k], &tk, &tm).unwrap();
            let v: Complex64 = ps.sensors[j]
                .node_integrals
                .iter()
                .map(|&(node, w)| dphi[node] * (2.0 * GAMMA * w))
                .sum();
            re.push(v.re);
            im.push(v.im);
        }
        re.extend(im);
        worst_born = worst_born.max(rel(&jd, &re));
    }
    (worst_fd, worst_born)
}

/// Worst relative gap between source-side and sensor-side measurements.
pub fn reciprocity_error(mesh: &Mesh, ps: &PatchSet, omega: f64, seed: u64) -> f64 {
    let map = ps.free_nodes(mesh);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let params = LogParams::from_beta(&random(&mut rng, 2 * map.len(), 0.3), 0.05, 0.5).unwrap();
    let fields = ForwardModel::new(mesh)
        .fields(&params.coefficients(&map, omega).unwrap(), ps)
        .unwrap();
    let a = compute_measurements(&fields, ps);
    let b = measurements_via_duals(&fields, ps);
    let mut worst = 0.0f64;
    for j in 0..ps.sensor_count() {
        for k in 0..ps.source_count() {
            let (x, y) = (a.get(j, k), b.get(j, k));
            worst = worst.max((x - y).norm() / x.norm());
        }
    }
    worst
}

pub fn dense(m: &SparseMatrix<f64>) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

/// P1 stiffness on the free nodes, gradients from the inverse of the
/// affine map.
pub fn stiffness_oracle(mesh: &Mesh, map: &FreeNodeMap) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(map.len(), map.len());
    for tet in mesh.tets() {
        let mut t = Matrix4::<f64>::zeros();
        for r in 0..4 {
            t[(r, 0)] = 1.0;
            for d in 0..3 {
                t[(r, d + 1)] = mesh.vertices()[tet[r]][d];
            }
        }
        let vol = t.determinant().abs() / 6.0;
        let inv = t.try_inverse().unwrap();
        for r in 0..4 {
            for s in 0..4 {
                if let (Some(i), Some(j)) = (map.param_index(tet[r]), map.param_index(tet[s])) {
                    k[(i, j)] += vol * (1..4).map(|d| inv[(d, r)] * inv[(d, s)]).sum::<f64>();
                }
            }
        }
    }
    k
}

/// Reduced stiffness assembled from the library's element matrices.
pub fn reduced_stiffness(mesh: &Mesh, map: &FreeNodeMap) -> Vec<Vec<f64>> {
    let mut k = vec![vec![0.0; map.len()]; map.len()];
    for t in 0..mesh.tets().len() {
        let s = mesh.tet_geometry(t).stiffness();
        let tet = mesh.tets()[t];
        for a in 0..4 {
            for b in 0..4 {
                if let (Some(i), Some(j)) = (map.param_index(tet[a]), map.param_index(tet[b])) {
                    k[i][j] += s[a][b];
                }
            }
        }
    }
    k
}

/// Worst central-difference gap of `∇R(u)` against `H(u) u`, relative to
/// `max |H u|`, over `draws` random `u`.
pub fn gradient_error(mesh: &Mesh, map: &FreeNodeMap, seed: u64, draws: usize) -> f64 {
    let model = PriorModel::new(mesh, map.clone()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        // Gradients of a few T, where the weight varies most.
        let u = random(&mut rng, map.len(), 0.003);
        let hu = model.h(&u, THRESHOLD).mul_vec(&u);
        let r = |v: &[f64]| evaluate_r(mesh, &map.scatter(v), THRESHOLD);
        let step = 1e-7;
        let scale = hu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..map.len() {
            let mut p = u.clone();
            let mut m = u.clone();
            p[i] += step;
            m[i] -= step;
            let fd = (r(&p) - r(&m)) / (2.0 * step);
            worst = worst.max((fd - hu[i]).abs() / scale);
        }
    }
    worst
}

/// Smallest eigenvalue of `H(u)` over random `u` of the given amplitudes.
pub fn min_eigenvalue(mesh: &Mesh, map: &FreeNodeMap, seed: u64, amplitudes: &[f64]) -> f64 {
    let model = PriorModel::new(mesh, map.clone()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    amplitudes
        .iter()
        .map(|&a| {
            let u = random(&mut rng, map.len(), a);
            dense(&model.h(&u, THRESHOLD)).symmetric_eigenvalues().min()
        })
        .fold(f64::INFINITY, f64::min)
}

pub struct DensePrior(pub nalgebra::Cholesky<f64, nalgebra::Dyn>);

impl PriorSolve for DensePrior {
    fn dim(&self) -> usize {
        self.0.l().nrows()
    }
    fn solve(&self, x: &[f64]) -> Vec<f64> {
        self.0.solve(&DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

/// `A = F G` with `F` of full column rank and `G` of full row rank.
pub struct Problem {
    pub a: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub fn problem(seed: u64, rows: usize, cols: usize, rank: usize) -> Problem {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let (f, g) = if rank < rows.min(cols) {
        (draw(rows, rank), draw(rank, cols))
    } else if rows >= cols {
        (draw(rows, cols), DMatrix::identity(cols, cols))
    } else {
        (DMatrix::identity(rows, rows), draw(rows, cols))
    };
    let a = &f * &g;
    let b = draw(cols, cols);
    let h = &b * b.transpose() / cols as f64 + DMatrix::identity(cols, cols);
    let y = DVector::from_iterator(rows, (0..rows).map(|i| ((i * 37 + seed as usize) % 11) as f64 - 5.0));
    Problem { a, f, g, h, y }
}

/// Upper Cholesky factor `L` with `H = LᵀL`, and its inverse.
pub fn factor(h: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let l = h.clone().cholesky().unwrap().l().transpose();
    let inv = l.clone().try_inverse().unwrap();
    (l, inv)
}

/// Textbook LSQR iterates `w_1, w_2, …` for `min |B w − y|`.
pub fn textbook_lsqr(b: &DMatrix<f64>, y: &DVector<f64>, steps: usize) -> Vec<DVector<f64>> {
    let mut beta = y.norm();
    let mut u = y / beta;
    let mut v = b.transpose() * &u;
    let mut alpha = v.norm();
    v /= alpha;
    let mut w = v.clone();
    let mut x = DVector::zeros(b.ncols());
    let (mut phibar, mut rhobar) = (beta, alpha);
    let mut out = Vec::new();
    for _ in 0..steps {
        u = b * &v - alpha * &u;
        beta = u.norm();
        u /= beta;
        v = b.transpose() * &u - beta * &v;
        alpha = v.norm();
        v /= alpha;
        let rho = rhobar.hypot(beta);
        let (c, s) = (rhobar / rho, beta / rho);
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        x += (phi / rho) * &w;
        w = &v - (theta / rho) * &w;
        out.push(x.clone());
    }
    out
}

pub fn run_lsqr(p: &Problem, stop: f64, steps: usize) -> LsqrResult {
    let prior = DensePrior(p.h.clone().cholesky().unwrap());
    let a = RowMatrix::from_fn(p.a.nrows(), p.a.ncols(), |i, j| p.a[(i, j)]);
    let sys = LinearizedSystem::new(a, p.y.as_slice().to_vec(), &prior).unwrap();
    let mut opts = LsqrOptions::new(stop, steps);
    opts.record_iterates = true;
    priorconditioned_lsqr_with(&sys, &opts).unwrap()
}

/// Relative distance of the converged solver output from the `H`-smallest
/// least-squares solution.
pub fn limit_error(p: &Problem) -> f64 {
    // Least-squares solutions are exactly those with G β = z, z = F⁺ y; the
    // H-smallest of them is H⁻¹Gᵀ(G H⁻¹ Gᵀ)⁻¹ z.
    let qr = p.f.clone().qr();
    let z = qr.r().solve_upper_triangular(&(qr.q().transpose() * &p.y)).unwrap();
    let hinv_gt = p.h.clone().cholesky().unwrap().solve(&p.g.transpose());
    let schur = (&p.g * &hinv_gt).cholesky().unwrap();
    let oracle = hinv_gt * schur.solve(&z);
    let r = run_lsqr(p, 0.0, 4 * p.a.ncols());
    (DVector::from_column_slice(&r.beta) - &oracle).norm() / oracle.norm()
}

/// Worst relative gap between the solver's iterates and textbook LSQR on
/// `A L⁻¹` mapped back by `L⁻¹`, over the first `steps` iterates.
pub fn iterate_error(p: &Problem, steps: usize) -> f64 {
    let (_, l_inv) = factor(&p.h);
    let reference = textbook_lsqr(&(&p.a * &l_inv), &p.y, steps);
    let r = run_lsqr(p, 0.0, steps);
    assert_eq!(r.iterates.len(), steps);
    r.iterates
        .iter()
        .zip(&reference)
        .map(|(got, w)| {
            let want = &l_inv * w;
            (DVector::from_column_slice(got) - &want).norm() / want.norm()
        })
        .fold(0.0, f64::max)
}

/// Sample mean of `|Γ^{-1/2} η|` and of its square over seeds `0..seeds`.
pub fn whitened_noise_moments(exact: &[f64], seeds: u64) -> (f64, f64) {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for seed in 0..seeds {
        let noise = NoiseModel {
            seed,
            ..NoiseModel::default()
        };
        let (values, sigma, fallbacks) = add_noise(exact, &noise);
        assert_eq!(fallbacks, 0);
        let r2: f64 = values.iter().zip(exact).zip(&sigma).map(|((v, e), s)| ((v - e) / s).powi(2)).sum();
        sum += r2.sqrt();
        sum_sq += r2;
    }
    (sum / seeds as f64, sum_sq / seeds as f64)
}

/// `E χ_n = √2 Γ((n+1)/2) / Γ(n/2)`, via log-gamma by Stirling series.
pub fn chi_mean(n: usize) -> f64 {
    fn ln_gamma(x: f64) -> f64 {
        // Shift up so the asymptotic series is accurate to double precision.
        let mut shift = 0.0;
        let mut x = x;
        while x < 20.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let s = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5));
        s + shift
    }
    let n = n as f64;
    (2.0f64.sqrt().ln() + ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}
