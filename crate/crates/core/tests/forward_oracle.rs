//! The sparse forward solver against a dense solver assembled here from
//! first principles: barycentric gradients from a matrix inverse and mass
//! matrices from the simplex monomial formula.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;

use dot_core::forward::{CoefficientField, ForwardModel, GAMMA};
use dot_core::mesh::{define_patches, generate_primitive, Mesh, PatchLayout, PatchSet, Shape};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫ λ^α` over a simplex of dimension `d` and measure `m`.
fn monomial(m: f64, d: usize, alpha: &[usize]) -> f64 {
    let total: usize = alpha.iter().sum();
    m * alpha.iter().map(|&a| factorial(a)).product::<f64>() * factorial(d) / factorial(total + d)
}

fn small() -> (Mesh, PatchSet) {
    let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.6).unwrap();
    let layout = PatchLayout::CylinderRings {
        sources: 3,
        sensors: 3,
        patch_radius: 0.3,
        ring_heights: vec![0.5],
    };
    let ps = define_patches(&mesh, &layout).unwrap();
    (mesh, ps)
}

fn dense_system(mesh: &Mesh, c: &CoefficientField) -> DMatrix<Complex64> {
    let n = mesh.node_count();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    let i = Complex64::new(0.0, 1.0);
    for tet in mesh.tets() {
        let p = tet.map(|v| mesh.vertices()[v]);
        let mut t = Matrix4::<f64>::zeros();
        for r in 0..4 {
            t[(r, 0)] = 1.0;
            for d in 0..3 {
                t[(r, d + 1)] = p[r][d];
            }
        }
        let vol = t.determinant().abs() / 6.0;
        // Column a of T⁻¹ holds (c, ∇λ_a).
        let inv = t.try_inverse().unwrap();
        let kbar = tet.iter().map(|&v| c.kappa[v]).sum::<f64>() / 4.0;
        for r in 0..4 {
            for s in 0..4 {
                let grad: f64 = (1..4).map(|d| inv[(d, r)] * inv[(d, s)]).sum();
                let mut mu_rs = 0.0;
                for e in 0..4 {
                    let mut alpha = [0usize; 4];
                    alpha[r] += 1;
                    alpha[s] += 1;
                    alpha[e] += 1;
                    mu_rs += c.mu[tet[e]] * monomial(vol, 3, &alpha);
                }
                let mut alpha = [0usize; 4];
                alpha[r] += 1;
                alpha[s] += 1;
                let mass = monomial(vol, 3, &alpha);
                a[(tet[r], tet[s])] += Complex64::new(kbar * vol * grad + mu_rs, 0.0) + i * (c.omega_over_c * mass);
            }
        }
    }
    for f in mesh.boundary_facets() {
        let p = f.map(|v| mesh.vertices()[v]);
        let e1 = nalgebra::Vector3::from(p[1]) - nalgebra::Vector3::from(p[0]);
        let e2 = nalgebra::Vector3::from(p[2]) - nalgebra::Vector3::from(p[0]);
        let area = 0.5 * e1.cross(&e2).norm();
        for r in 0..3 {
            for s in 0..3 {
                let mut alpha = [0usize; 3];
                alpha[r] += 1;
                alpha[s] += 1;
                a[(f[r], f[s])] += Complex64::new(2.0 * GAMMA * monomial(area, 2, &alpha), 0.0);
            }
        }
    }
    a
}

fn wavy(mesh: &Mesh, omega: f64) -> CoefficientField {
    let k = mesh.vertices().iter().map(|x| 0.05 * (1.0 + 0.5 * (2.0 * x[0]).sin() * x[2])).collect();
    let m = mesh.vertices().iter().map(|x| 0.5 * (1.0 + 0.4 * x[1] * x[1])).collect();
    CoefficientField::new(k, m, omega).unwrap()
}

#[test]
fn sparse_measurements_match_dense_oracle() {
    let (mesh, ps) = small();
    assert!(mesh.node_count() <= 200, "{} nodes", mesh.node_count());
    let model = ForwardModel::new(&mesh);
    for omega in [0.0, 0.021, 2.0] {
        let c = wavy(&mesh, omega);
        let lu = dense_system(&mesh, &c).lu();
        let solve = |patch: &dot_core::mesh::Patch| {
            let mut f = DVector::<Complex64>::zeros(mesh.node_count());
            for &(n, w) in &patch.node_integrals {
                f[n] += Complex64::new(2.0 * w, 0.0);
            }
            lu.solve(&f).unwrap()
        };
        let m = model.measure(&c, &ps).unwrap();
        for (k, src) in ps.sources.iter().enumerate() {
            let phi = solve(src);
            for (j, sen) in ps.sensors.iter().enumerate() {
                let oracle: Complex64 = sen.node_integrals.iter().map(|&(n, w)| phi[n] * (2.0 * GAMMA * w)).sum();
                let got = m.get(j, k);
                assert!((got - oracle).norm() <= 1e-9 * oracle.norm(), "omega {omega} ({j},{k}): {got} vs {oracle}");
            }
        }
    }
}

#[test]
fn measurements_converge_under_refinement() {
    let layout = PatchLayout::CylinderRings {
        sources: 2,
        sensors: 2,
        patch_radius: 0.2,
        ring_heights: vec![0.5],
    };
    let mut values = Vec::new();
    for h in [0.2, 0.14, 0.1, 0.06] {
        let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, h).unwrap();
        let ps = define_patches(&mesh, &layout).unwrap();
        let c = CoefficientField::homogeneous(mesh.node_count(), 0.05, 0.5, 0.021).unwrap();
        let m = ForwardModel::new(&mesh).measure(&c, &ps).unwrap();
        values.push(m.get(1, 0));
    }
    // Errors against the finest mesh shrink monotonically.
    let reference = values.pop().unwrap();
    let errors: Vec<f64> = values.iter().map(|v| (v - reference).norm() / reference.norm()).collect();
    assert!(errors.windows(2).all(|e| e[1] < e[0]), "{errors:?}");
    assert!(errors[2] < 0.02, "{errors:?}");
}
