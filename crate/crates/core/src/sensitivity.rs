//! Log-parameters, the adjoint measurement Jacobian and the Born-type
//! perturbation used to validate it.
//!
//! With `κ = κ₀ exp(ς)` and `μ = μ₀ exp(v)` interpolated from nodal
//! values, a change of `ς_n` moves `κ` by `κ_n φ_n`. The derivative of the
//! measurement for sensor `j` and source `k` is then
//! `−γ ∫ ϑ ∇ψ_j·∇φ_k + θ ψ_j φ_k dx`, which is exact for the discrete
//! model because the system matrix is linear in the nodal coefficients.

use num_complex::Complex64;

use crate::data::RetentionMask;
use crate::error::{Error, Result};
use crate::forward::{CoefficientField, ForwardFields, ForwardModel, GAMMA};
use crate::linalg::RowMatrix;
use crate::mesh::{FreeNodeMap, Mesh, PatchSet};

/// Nodal log-deviations on the free nodes with their reference levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogParams {
    pub sigma: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub kappa0: f64,
    pub mu0: f64,
}

impl LogParams {
    pub fn zeros(free: usize, kappa0: f64, mu0: f64) -> Self {
        LogParams {
            sigma: vec![0.0; free],
            upsilon: vec![0.0; free],
            kappa0,
            mu0,
        }
    }

    /// Splits the stacked vector `β = [ς; v]`.
    pub fn from_beta(beta: &[f64], kappa0: f64, mu0: f64) -> Result<Self> {
        if beta.len() % 2 != 0 {
            return Err(Error::Dimension(format!("stacked parameter of odd length {}", beta.len())));
        }
        let n = beta.len() / 2;
        Ok(LogParams {
            sigma: beta[..n].to_vec(),
            upsilon: beta[n..].to_vec(),
            kappa0,
            mu0,
        })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn beta(&self) -> Vec<f64> {
        [self.sigma.as_slice(), self.upsilon.as_slice()].concat()
    }

    pub fn kappa(&self, map: &FreeNodeMap) -> Vec<f64> {
        map.scatter(&self.sigma).iter().map(|s| self.kappa0 * s.exp()).collect()
    }

    pub fn mu(&self, map: &FreeNodeMap) -> Vec<f64> {
        map.scatter(&self.upsilon).iter().map(|v| self.mu0 * v.exp()).collect()
    }

    pub fn coefficients(&self, map: &FreeNodeMap, omega_over_c: f64) -> Result<CoefficientField> {
        if self.len() != map.len() || self.upsilon.len() != map.len() {
            return Err(Error::Dimension(format!(
                "{} log-parameters for {} free nodes",
                self.len(),
                map.len()
            )));
        }
        CoefficientField::new(self.kappa(map), self.mu(map), omega_over_c)
    }
}

/// Real Jacobian with rows `[Re; Im]` over the retained pairs and columns
/// `[ς | v]` over the free nodes.
#[derive(Debug, Clone)]
pub struct RealJacobian {
    pub matrix: RowMatrix,
    pub pairs: usize,
    pub free: usize,
}

impl RealJacobian {
    /// Drops the imaginary block, which vanishes for unmodulated data.
    pub fn real_rows(self) -> RowMatrix {
        let mut m = self.matrix;
        m.truncate_rows(self.pairs);
        m
    }
}

/// Jacobian at `params`, solving the source and sensor problems first.
pub fn measurement_jacobian(
    mesh: &Mesh,
    patches: &PatchSet,
    params: &LogParams,
    omega_over_c: f64,
    mask: &RetentionMask,
) -> Result<RealJacobian> {
    let map = patches.free_nodes(mesh);
    let coeff = params.coefficients(&map, omega_over_c)?;
    let model = ForwardModel::new(mesh);
    let fields = model.fields(&coeff, patches)?;
    Ok(jacobian_from_fields(&model, &fields, &coeff, &map, mask))
}

/// Jacobian from precomputed fields.
pub fn jacobian_from_fields(
    model: &ForwardModel<'_>,
    fields: &ForwardFields,
    coeff: &CoefficientField,
    map: &FreeNodeMap,
    mask: &RetentionMask,
) -> RealJacobian {
    let mesh = model.mesh();
    let geo = model.geometry();
    let tets = mesh.tets();
    let n = map.len();
    let grads = |u: &Vec<Complex64>| -> Vec<[Complex64; 3]> {
        tets.iter()
            .zip(geo)
            .map(|(tet, g)| g.gradient_c(tet.map(|v| u[v])))
            .collect()
    };
    let gphi: Vec<_> = fields.phi.iter().map(grads).collect();
    let gpsi: Vec<_> = fields.psi.iter().map(grads).collect();
    let local: Vec<[usize; 4]> = tets
        .iter()
        .map(|tet| tet.map(|v| map.param_index(v).unwrap_or(usize::MAX)))
        .collect();

    let pairs = mask.len();
    let mut jac = RowMatrix::zeros(2 * pairs, 2 * n);
    let mut acc = vec![Complex64::new(0.0, 0.0); 2 * n];
    for (r, &(k, j)) in mask.pairs().iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        let (phi, psi) = (&fields.phi[k], &fields.psi[j]);
        let (gp, gs) = (&gphi[k], &gpsi[j]);
        for (t, tet) in tets.iter().enumerate() {
            let vol = geo[t].volume;
            let d = gs[t][0] * gp[t][0] + gs[t][1] * gp[t][1] + gs[t][2] * gp[t][2];
            let u = tet.map(|v| psi[v]);
            let w = tet.map(|v| phi[v]);
            let su = u[0] + u[1] + u[2] + u[3];
            let sw = w[0] + w[1] + w[2] + w[3];
            let uw = u[0] * w[0] + u[1] * w[1] + u[2] * w[2] + u[3] * w[3];
            let base = su * sw + uw;
            for a in 0..4 {
                let p = local[t][a];
                if p == usize::MAX {
                    continue;
                }
                acc[p] += d * (vol / 4.0);
                acc[n + p] += (base + u[a] * sw + w[a] * su + 2.0 * u[a] * w[a]) * (vol / 120.0);
            }
        }
        let (re, im) = jac_rows(&mut jac, r, pairs + r);
        for (p, &node) in map.free_nodes().iter().enumerate() {
            let ds = acc[p] * (-GAMMA * coeff.kappa[node]);
            let dv = acc[n + p] * (-GAMMA * coeff.mu[node]);
            re[p] = ds.re;
            re[n + p] = dv.re;
            im[p] = ds.im;
            im[n + p] = dv.im;
        }
    }
    RealJacobian {
        matrix: jac,
        pairs,
        free: n,
    }
}

fn jac_rows(m: &mut RowMatrix, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a < b);
    let cols = m.cols();
    let (head, tail) = m.rows_split_mut(b);
    (&mut head[a * cols..(a + 1) * cols], &mut tail[..cols])
}

/// Solution `φ′_k` of the perturbed problem with the same system matrix
/// and right-hand side `−∫ ϑ ∇φ_k·∇v − ∫ θ φ_k v` for nodal `(ϑ, θ)`.
pub fn born_perturbation(
    model: &ForwardModel<'_>,
    coeff: &CoefficientField,
    phi_k: &[Complex64],
    theta_kappa: &[f64],
    theta_mu: &[f64],
) -> Result<Vec<Complex64>> {
    let mesh = model.mesh();
    let nn = mesh.node_count();
    if phi_k.len() != nn || theta_kappa.len() != nn || theta_mu.len() != nn {
        return Err(Error::Dimension("perturbation fields must be nodal".into()));
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); nn];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let g = &model.geometry()[t];
        let tbar = tet.iter().map(|&v| theta_kappa[v]).sum::<f64>() / 4.0;
        let gphi = g.gradient_c(tet.map(|v| phi_k[v]));
        let mm = crate::geometry::weighted_mass(g.volume, tet.map(|v| theta_mu[v]));
        for b in 0..4 {
            let gb = g.grads[b];
            let grad_term = (gphi[0] * gb[0] + gphi[1] * gb[1] + gphi[2] * gb[2]) * (tbar * g.volume);
            let mass_term: Complex64 = (0..4).map(|a| phi_k[tet[a]] * mm[b][a]).sum();
            rhs[tet[b]] -= grad_term + mass_term;
        }
    }
    let system = model.assemble(coeff)?;
    let re: Vec<f64> = rhs.iter().map(|v| v.re).collect();
    let im: Vec<f64> = rhs.iter().map(|v| v.im).collect();
    // Solve real and imaginary loads separately and recombine.
    let f = crate::forward::solve_fields(&system, &[re, im], &[])?;
    let i = Complex64::new(0.0, 1.0);
    Ok(f.phi[0].iter().zip(&f.phi[1]).map(|(a, b)| a + i * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stack;
    use crate::forward::compute_measurements;
    use crate::mesh::{define_patches, generate_primitive, PatchLayout, Shape};

    fn setup() -> (Mesh, PatchSet) {
        let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.35).unwrap();
        let layout = PatchLayout::CylinderRings {
            sources: 2,
            sensors: 2,
            patch_radius: 0.25,
            ring_heights: vec![0.5],
        };
        let ps = define_patches(&mesh, &layout).unwrap();
        (mesh, ps)
    }

    fn wavy(map: &FreeNodeMap, mesh: &Mesh, a: f64) -> LogParams {
        let mut p = LogParams::zeros(map.len(), 0.05, 0.5);
        for (i, &node) in map.free_nodes().iter().enumerate() {
            let x = mesh.vertices()[node];
            p.sigma[i] = a * (3.0 * x[0]).sin();
            p.upsilon[i] = a * (2.0 * x[1] + x[2]).cos();
        }
        p
    }

    #[test]
    fn zero_params_reproduce_reference_levels() {
        let (mesh, ps) = setup();
        let map = ps.free_nodes(&mesh);
        let c = LogParams::zeros(map.len(), 0.05, 0.5).coefficients(&map, 0.0).unwrap();
        assert!(c.kappa.iter().all(|&k| k == 0.05));
        assert!(c.mu.iter().all(|&m| m == 0.5));
    }

    #[test]
    fn unmodulated_imaginary_block_vanishes() {
        let (mesh, ps) = setup();
        let map = ps.free_nodes(&mesh);
        let mask = RetentionMask::full(2, 2);
        let jac = measurement_jacobian(&mesh, &ps, &wavy(&map, &mesh, 0.2), 0.0, &mask).unwrap();
        for r in mask.len()..2 * mask.len() {
            assert!(jac.matrix.row(r).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (mesh, ps) = setup();
        let map = ps.free_nodes(&mesh);
        let mask = RetentionMask::full(2, 2);
        let w = 0.3;
        let p = wavy(&map, &mesh, 0.2);
        let jac = measurement_jacobian(&mesh, &ps, &p, w, &mask).unwrap();
        let dir: Vec<f64> = (0..2 * map.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let model = ForwardModel::new(&mesh);
        let eval = |t: f64| {
            let beta: Vec<f64> = p.beta().iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            let q = LogParams::from_beta(&beta, 0.05, 0.5).unwrap();
            let m = model.measure(&q.coefficients(&map, w).unwrap(), &ps).unwrap();
            stack(&m, &mask, true)
        };
        let h = 1e-5;
        let (plus, minus) = (eval(h), eval(-h));
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let jd = jac.matrix.mul_vec(&dir);
        let err: f64 = fd.iter().zip(&jd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = jd.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * scale, "{err} vs {scale}");
    }

    #[test]
    fn born_field_is_linear_and_vanishes_at_zero() {
        let (mesh, ps) = setup();
        let model = ForwardModel::new(&mesh);
        let map = ps.free_nodes(&mesh);
        let coeff = wavy(&map, &mesh, 0.1).coefficients(&map, 0.2).unwrap();
        let fields = model.fields(&coeff, &ps).unwrap();
        let nn = mesh.node_count();
        let zero = born_perturbation(&model, &coeff, &fields.phi[0], &vec![0.0; nn], &vec![0.0; nn]).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
        let tk: Vec<f64> = mesh.vertices().iter().map(|x| 0.01 * x[2]).collect();
        let tm: Vec<f64> = mesh.vertices().iter().map(|x| 0.1 * x[0]).collect();
        let one = born_perturbation(&model, &coeff, &fields.phi[0], &tk, &tm).unwrap();
        let tk2: Vec<f64> = tk.iter().map(|v| 2.0 * v).collect();
        let tm2: Vec<f64> = tm.iter().map(|v| 2.0 * v).collect();
        let two = born_perturbation(&model, &coeff, &fields.phi[0], &tk2, &tm2).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!((2.0 * a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
        let m = compute_measurements(&fields, &ps);
        assert!(m.get(0, 0).norm() > 0.0);
    }
}
