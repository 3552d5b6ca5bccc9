//! P1 finite element discretization of the diffusion approximation with
//! Robin boundary coupling, its source and sensor solves, and the boundary
//! measurements.
//!
//! The system matrix is
//! `∫ κ∇u·∇v + (μ + iω/c) u v dx + 2γ ∫_∂Ω u v dS`, symmetric under plain
//! transposition. A patch with profile `Ψ` loads `2 ∫ Ψ v dS`, and the
//! measurement at sensor `j` for source `k` is `2γ ∫ Ψ_j φ_k dS`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{self, TetGeometry};
use crate::linalg::{Cholesky, ComplexLu, Pattern, SparseMatrix};
use crate::mesh::{Mesh, Patch, PatchSet};

/// Robin coupling constant of the diffusion approximation.
pub const GAMMA: f64 = 0.25;

/// Relative residual every field solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Nodal diffusivity and absorption with the modulation parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub kappa: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega_over_c: f64,
}

impl CoefficientField {
    pub fn new(kappa: Vec<f64>, mu: Vec<f64>, omega_over_c: f64) -> Result<Self> {
        if kappa.len() != mu.len() {
            return Err(Error::Dimension(format!(
                "kappa has {} nodes but mu has {}",
                kappa.len(),
                mu.len()
            )));
        }
        if let Some(i) = kappa.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Domain(format!("kappa at node {i} is {}", kappa[i])));
        }
        if let Some(i) = mu.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!("mu at node {i} is {}", mu[i])));
        }
        if !omega_over_c.is_finite() {
            return Err(Error::Domain("omega_over_c must be finite".into()));
        }
        Ok(CoefficientField {
            kappa,
            mu,
            omega_over_c,
        })
    }

    pub fn homogeneous(nodes: usize, kappa: f64, mu: f64, omega_over_c: f64) -> Result<Self> {
        Self::new(vec![kappa; nodes], vec![mu; nodes], omega_over_c)
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }
}

/// Complex nodal fields: one per source (`phi`) and one per sensor (`psi`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardFields {
    pub phi: Vec<Vec<Complex64>>,
    pub psi: Vec<Vec<Complex64>>,
}

/// `m[j][k]`: sensor `j`, source `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMeasurements {
    pub m: Vec<Vec<Complex64>>,
}

impl ComplexMeasurements {
    pub fn sensors(&self) -> usize {
        self.m.len()
    }

    pub fn sources(&self) -> usize {
        self.m.first().map_or(0, Vec::len)
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.m[j][k]
    }
}

/// Mesh-dependent data reused by every assembly on one mesh.
pub struct ForwardModel<'m> {
    mesh: &'m Mesh,
    pattern: Arc<Pattern>,
    geometry: Vec<TetGeometry>,
    stiffness: Vec<[[f64; 4]; 4]>,
    tet_slots: Vec<[usize; 16]>,
    /// `2γ ∫_∂Ω φ_a φ_b dS` on the pattern.
    robin: Vec<f64>,
}

impl<'m> ForwardModel<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let pattern = Arc::new(Pattern::from_elements(mesh.node_count(), mesh.tets(), Some));
        let geometry: Vec<TetGeometry> = (0..mesh.tets().len()).map(|t| mesh.tet_geometry(t)).collect();
        let stiffness = geometry.iter().map(TetGeometry::stiffness).collect();
        let tet_slots = mesh
            .tets()
            .iter()
            .map(|tet| {
                let mut s = [0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        s[4 * a + b] = pattern.slot(tet[a], tet[b]);
                    }
                }
                s
            })
            .collect();
        let mut robin = vec![0.0; pattern.nnz()];
        for (f, facet) in mesh.boundary_facets().iter().enumerate() {
            let (area, _) = geometry::triangle_area_normal(&mesh.facet_points(f));
            let m = geometry::facet_mass(area);
            for a in 0..3 {
                for b in 0..3 {
                    robin[pattern.slot(facet[a], facet[b])] += 2.0 * GAMMA * m[a][b];
                }
            }
        }
        ForwardModel {
            mesh,
            pattern,
            geometry,
            stiffness,
            tet_slots,
            robin,
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn geometry(&self) -> &[TetGeometry] {
        &self.geometry
    }

    pub fn assemble(&self, coeff: &CoefficientField) -> Result<SparseMatrix<Complex64>> {
        let n = self.mesh.node_count();
        if coeff.len() != n {
            return Err(Error::Dimension(format!(
                "coefficients have {} nodes, mesh has {n}",
                coeff.len()
            )));
        }
        let mut a = SparseMatrix::<Complex64>::zeros(self.pattern.clone());
        let vals = a.values_mut();
        for (v, &r) in vals.iter_mut().zip(&self.robin) {
            v.re = r;
        }
        let w = coeff.omega_over_c;
        for (t, tet) in self.mesh.tets().iter().enumerate() {
            let g = &self.geometry[t];
            let kbar = tet.iter().map(|&v| coeff.kappa[v]).sum::<f64>() / 4.0;
            let mm = geometry::weighted_mass(g.volume, tet.map(|v| coeff.mu[v]));
            let um = geometry::unit_mass(g.volume);
            let k = &self.stiffness[t];
            let slots = &self.tet_slots[t];
            for a in 0..4 {
                for b in 0..4 {
                    let s = slots[4 * a + b];
                    vals[s].re += kbar * k[a][b] + mm[a][b];
                    if w != 0.0 {
                        vals[s].im += w * um[a][b];
                    }
                }
            }
        }
        Ok(a)
    }

    /// `2 ∫ Ψ φ_n dS` for every node `n`.
    pub fn boundary_load(&self, patch: &Patch) -> Result<Vec<f64>> {
        boundary_load(self.mesh.node_count(), patch)
    }

    /// Source and sensor fields for `coeff`.
    pub fn fields(&self, coeff: &CoefficientField, patches: &PatchSet) -> Result<ForwardFields> {
        let system = self.assemble(coeff)?;
        let src = patches
            .sources
            .iter()
            .map(|p| self.boundary_load(p))
            .collect::<Result<Vec<_>>>()?;
        let sen = patches
            .sensors
            .iter()
            .map(|p| self.boundary_load(p))
            .collect::<Result<Vec<_>>>()?;
        solve_fields(&system, &src, &sen)
    }

    /// Measurements for `coeff`, solving only the source problems.
    pub fn measure(&self, coeff: &CoefficientField, patches: &PatchSet) -> Result<ComplexMeasurements> {
        let system = self.assemble(coeff)?;
        let src = patches
            .sources
            .iter()
            .map(|p| self.boundary_load(p))
            .collect::<Result<Vec<_>>>()?;
        let fields = solve_fields(&system, &src, &[])?;
        Ok(compute_measurements(&fields, patches))
    }
}

pub fn assemble_system(mesh: &Mesh, coeff: &CoefficientField) -> Result<SparseMatrix<Complex64>> {
    ForwardModel::new(mesh).assemble(coeff)
}

pub fn assemble_boundary_load(mesh: &Mesh, patch: &Patch) -> Result<Vec<f64>> {
    boundary_load(mesh.node_count(), patch)
}

fn boundary_load(nodes: usize, patch: &Patch) -> Result<Vec<f64>> {
    if patch.node_integrals.is_empty() || patch.area <= 0.0 {
        return Err(Error::Resolution("patch is empty".into()));
    }
    let mut f = vec![0.0; nodes];
    for &(n, w) in &patch.node_integrals {
        f[n] += 2.0 * w;
    }
    Ok(f)
}

/// Solves the system for every source and sensor load with a single
/// factorization. A purely real system takes the Cholesky path.
pub fn solve_fields(
    system: &SparseMatrix<Complex64>,
    source_loads: &[Vec<f64>],
    sensor_loads: &[Vec<f64>],
) -> Result<ForwardFields> {
    let n = system.dim();
    let loads: Vec<&Vec<f64>> = source_loads.iter().chain(sensor_loads).collect();
    if let Some(l) = loads.iter().find(|l| l.len() != n) {
        return Err(Error::Dimension(format!("load of length {} for {n} nodes", l.len())));
    }
    let factor = match system.as_real() {
        Some(real) => Factor::Real(
            real.cholesky()
                .map_err(|e| Error::Solver(format!("forward system factorization: {e}")))?,
        ),
        None => Factor::Complex(system.lu()?),
    };
    let mut block: Vec<Complex64> = loads
        .iter()
        .flat_map(|l| l.iter().map(|&x| Complex64::new(x, 0.0)))
        .collect();
    factor.solve_block(&mut block);
    let mut solutions: Vec<Vec<Complex64>> = block.chunks(n.max(1)).map(<[Complex64]>::to_vec).collect();
    if loads.is_empty() {
        solutions.clear();
    }
    // Iterative refinement for the columns that miss the tolerance.
    for sweep in 0..=REFINEMENT_SWEEPS {
        let mut failing = Vec::new();
        let mut worst: f64 = 0.0;
        for (c, (x, b)) in solutions.iter().zip(&loads).enumerate() {
            let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if bn == 0.0 {
                continue;
            }
            let r = residual(system, x, b);
            let rel = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / bn;
            if !(rel <= SOLVE_TOLERANCE) {
                worst = worst.max(rel);
                failing.push((c, r));
            }
        }
        if failing.is_empty() {
            break;
        }
        if sweep == REFINEMENT_SWEEPS {
            return Err(Error::Solver(format!("forward solve reached relative residual {worst:e}")));
        }
        let mut block: Vec<Complex64> = failing.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        factor.solve_block(&mut block);
        for ((c, _), d) in failing.iter().zip(block.chunks(n)) {
            for (x, dx) in solutions[*c].iter_mut().zip(d) {
                *x += dx;
            }
        }
    }
    let psi = solutions.split_off(source_loads.len());
    Ok(ForwardFields { phi: solutions, psi })
}

fn residual(a: &SparseMatrix<Complex64>, x: &[Complex64], b: &[f64]) -> Vec<Complex64> {
    let ax = a.mul_vec(x);
    ax.iter().zip(b).map(|(v, &bi)| bi - v).collect()
}

const REFINEMENT_SWEEPS: usize = 3;

enum Factor {
    Real(Cholesky),
    Complex(ComplexLu),
}

impl Factor {
    /// Column-major block of complex right-hand sides.
    fn solve_block(&self, block: &mut [Complex64]) {
        match self {
            Factor::Complex(lu) => lu.solve_block(block),
            Factor::Real(chol) => {
                let mut re: Vec<f64> = block.iter().map(|z| z.re).collect();
                chol.solve_block(&mut re);
                if block.iter().any(|z| z.im != 0.0) {
                    let mut im: Vec<f64> = block.iter().map(|z| z.im).collect();
                    chol.solve_block(&mut im);
                    for ((z, r), i) in block.iter_mut().zip(re).zip(im) {
                        *z = Complex64::new(r, i);
                    }
                } else {
                    for (z, r) in block.iter_mut().zip(re) {
                        *z = Complex64::new(r, 0.0);
                    }
                }
            }
        }
    }
}

/// `2γ ∫_{m_j} φ_k dS` through the P1 trace of each source field.
pub fn compute_measurements(fields: &ForwardFields, patches: &PatchSet) -> ComplexMeasurements {
    let m = patches
        .sensors
        .iter()
        .map(|sensor| fields.phi.iter().map(|phi| patch_integral(sensor, phi)).collect())
        .collect();
    ComplexMeasurements { m }
}

/// The same measurements through the sensor fields: `2γ ∫_{s_k} ψ_j dS`.
pub fn measurements_via_duals(fields: &ForwardFields, patches: &PatchSet) -> ComplexMeasurements {
    let m = fields
        .psi
        .iter()
        .map(|psi| patches.sources.iter().map(|src| patch_integral(src, psi)).collect())
        .collect();
    ComplexMeasurements { m }
}

fn patch_integral(patch: &Patch, u: &[Complex64]) -> Complex64 {
    patch
        .node_integrals
        .iter()
        .map(|&(n, w)| u[n] * (2.0 * GAMMA * w))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{define_patches, generate_primitive, unit_tet, PatchLayout, Shape};

    fn small_cylinder() -> (Mesh, PatchSet) {
        let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.3).unwrap();
        let layout = PatchLayout::CylinderRings {
            sources: 4,
            sensors: 4,
            patch_radius: 0.2,
            ring_heights: vec![0.5],
        };
        let ps = define_patches(&mesh, &layout).unwrap();
        (mesh, ps)
    }

    fn smooth_coeff(mesh: &Mesh, w: f64) -> CoefficientField {
        let kappa = mesh.vertices().iter().map(|p| 0.05 * (1.0 + 0.3 * p[0] * p[1])).collect();
        let mu = mesh.vertices().iter().map(|p| 0.5 + 0.2 * p[2]).collect();
        CoefficientField::new(kappa, mu, w).unwrap()
    }

    #[test]
    fn unit_tet_matches_hand_values() {
        let mesh = unit_tet();
        let c = CoefficientField::homogeneous(4, 1.0, 0.0 + f64::MIN_POSITIVE, 0.0).unwrap();
        let a = assemble_system(&mesh, &c).unwrap();
        let s3 = 3f64.sqrt();
        let close = |i: usize, j: usize, v: f64| {
            let got = a.get(i, j);
            assert!((got.re - v).abs() < 1e-15 && got.im == 0.0, "({i},{j}) {got} vs {v}");
        };
        // Stiffness plus half the boundary mass (2γ = 1/2).
        close(0, 0, 0.5 + 0.5 * (3.0 / 12.0));
        close(0, 1, -1.0 / 6.0 + 0.5 * (2.0 / 24.0));
        close(1, 1, 1.0 / 6.0 + 0.5 * (s3 / 12.0 + 2.0 / 12.0));
        close(1, 2, 0.5 * (s3 / 24.0 + 1.0 / 24.0));
    }

    #[test]
    fn system_is_exactly_symmetric() {
        let (mesh, _) = small_cylinder();
        let a = assemble_system(&mesh, &smooth_coeff(&mesh, 0.3)).unwrap();
        assert!(a.is_symmetric());
    }

    #[test]
    fn flipping_modulation_conjugates() {
        let (mesh, _) = small_cylinder();
        let a = assemble_system(&mesh, &smooth_coeff(&mesh, 0.3)).unwrap();
        let b = assemble_system(&mesh, &smooth_coeff(&mesh, -0.3)).unwrap();
        assert_eq!(a.conj().values(), b.values());
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        assert!(matches!(
            CoefficientField::new(vec![1.0, 0.0], vec![1.0, 1.0], 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_facet_load() {
        let mesh = unit_tet();
        let layout = PatchLayout::Explicit {
            sources: vec![vec![2]],
            sensors: vec![vec![1]],
        };
        let ps = define_patches(&mesh, &layout).unwrap();
        let f = assemble_boundary_load(&mesh, &ps.sources[0]).unwrap();
        let (area, _) = geometry::triangle_area_normal(&mesh.facet_points(2));
        let support: Vec<usize> = (0..4).filter(|&i| f[i] != 0.0).collect();
        assert_eq!(support.len(), 3);
        for &i in &support {
            assert!((f[i] - 2.0 * area / 3.0).abs() < 1e-15);
        }
        let g = assemble_boundary_load(&mesh, &ps.sensors[0]).unwrap();
        assert!((g.iter().sum::<f64>() / 2.0 - area).abs() < 1e-12);
    }

    #[test]
    fn loads_of_disjoint_patches_have_disjoint_supports() {
        let (mesh, ps) = small_cylinder();
        let fm = ForwardModel::new(&mesh);
        let loads: Vec<Vec<f64>> = ps.sources.iter().chain(&ps.sensors).map(|p| fm.boundary_load(p).unwrap()).collect();
        for a in 0..loads.len() {
            let s: f64 = loads[a].iter().sum();
            assert!((s / 2.0 - [&ps.sources[..], &ps.sensors[..]].concat()[a].area).abs() < 1e-12);
            for b in (a + 1)..loads.len() {
                assert!(loads[a].iter().zip(&loads[b]).all(|(x, y)| *x == 0.0 || *y == 0.0));
            }
        }
    }

    #[test]
    fn zero_load_gives_zero_field() {
        let (mesh, _) = small_cylinder();
        let a = assemble_system(&mesh, &smooth_coeff(&mesh, 0.0)).unwrap();
        let f = solve_fields(&a, &[vec![0.0; mesh.node_count()]], &[]).unwrap();
        assert!(f.phi[0].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn unmodulated_fields_and_measurements_are_real() {
        let (mesh, ps) = small_cylinder();
        let fm = ForwardModel::new(&mesh);
        let fields = fm.fields(&smooth_coeff(&mesh, 0.0), &ps).unwrap();
        for u in fields.phi.iter().chain(&fields.psi) {
            let nrm = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(u.iter().all(|v| v.im.abs() <= 1e-12 * nrm));
        }
        let m = compute_measurements(&fields, &ps);
        assert!(m.m.iter().flatten().all(|v| v.im.abs() <= 1e-12 * v.norm()));
    }

    #[test]
    fn reciprocity_holds() {
        let (mesh, ps) = small_cylinder();
        let fm = ForwardModel::new(&mesh);
        for w in [0.0, 0.021, 1.5] {
            let fields = fm.fields(&smooth_coeff(&mesh, w), &ps).unwrap();
            let a = compute_measurements(&fields, &ps);
            let b = measurements_via_duals(&fields, &ps);
            for j in 0..a.sensors() {
                for k in 0..a.sources() {
                    let (x, y) = (a.get(j, k), b.get(j, k));
                    assert!((x - y).norm() <= 1e-10 * x.norm(), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn reversed_modulation_conjugates_measurements() {
        let (mesh, ps) = small_cylinder();
        let fm = ForwardModel::new(&mesh);
        let a = fm.measure(&smooth_coeff(&mesh, 0.4), &ps).unwrap();
        let b = fm.measure(&smooth_coeff(&mesh, -0.4), &ps).unwrap();
        for (x, y) in a.m.iter().flatten().zip(b.m.iter().flatten()) {
            assert!((x.conj() - y).norm() <= 1e-12 * x.norm());
        }
    }
}
