//! Perona–Malik edge-preferring functional and its lagged-diffusivity
//! matrix.
//!
//! `R(u) = ∫ r(|∇u|) dx` with `r(t) = ½T² ln(1 + (t/T)²)`. Freezing the
//! weight `c = r′(t)/t` at the current iterate gives the weighted stiffness
//! matrix `H(u)` with `∇R(u) = H(u) u`. Rows and columns are the free nodes,
//! which puts a homogeneous Dirichlet condition on `S`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::TetGeometry;
use crate::linalg::{Cholesky, Pattern, SparseMatrix};
use crate::mesh::{FreeNodeMap, Mesh};
use crate::sensitivity::LogParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    /// Edge threshold `T`.
    pub threshold: f64,
    /// Weight of the absorption block relative to the diffusivity block.
    pub ratio_b_over_a: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            threshold: 5e-3,
            ratio_b_over_a: 1.0 / 3.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.threshold)));
        }
        if !(self.ratio_b_over_a > 0.0 && self.ratio_b_over_a.is_finite()) {
            return Err(Error::Config(format!(
                "b/a must be positive, got {}",
                self.ratio_b_over_a
            )));
        }
        Ok(())
    }
}

/// `(r(t), r′(t), r′(t)/t)`; the last is taken in closed form so `t = 0`
/// needs no special case.
pub fn pm_r(t: f64, threshold: f64) -> (f64, f64, f64) {
    let q = t / threshold;
    let c = 1.0 / (1.0 + q * q);
    (0.5 * threshold * threshold * (q * q).ln_1p(), t * c, c)
}

/// `R(u)` for a nodal field `u`.
pub fn evaluate_r(mesh: &Mesh, u: &[f64], threshold: f64) -> f64 {
    (0..mesh.tets().len())
        .map(|t| {
            let g = mesh.tet_geometry(t);
            let grad = g.gradient(mesh.tets()[t].map(|v| u[v]));
            g.volume * pm_r(crate::geometry::norm(grad), threshold).0
        })
        .sum()
}

/// Mesh data for repeated assembly of `H` on one free-node set.
pub struct PriorModel<'m> {
    mesh: &'m Mesh,
    map: FreeNodeMap,
    pattern: Arc<Pattern>,
    geometry: Vec<TetGeometry>,
    stiffness: Vec<[[f64; 4]; 4]>,
}

impl<'m> PriorModel<'m> {
    pub fn new(mesh: &'m Mesh, map: FreeNodeMap) -> Result<Self> {
        if map.node_count() != mesh.node_count() {
            return Err(Error::Dimension("free-node map does not match the mesh".into()));
        }
        if map.len() == mesh.node_count() {
            return Err(Error::Definiteness(
                "the Dirichlet set is empty, so H is only semidefinite".into(),
            ));
        }
        let pattern = Arc::new(Pattern::from_elements(map.len(), mesh.tets(), |v| map.param_index(v)));
        let geometry: Vec<TetGeometry> = (0..mesh.tets().len()).map(|t| mesh.tet_geometry(t)).collect();
        let stiffness = geometry.iter().map(TetGeometry::stiffness).collect();
        Ok(PriorModel {
            mesh,
            map,
            pattern,
            geometry,
            stiffness,
        })
    }

    pub fn free_nodes(&self) -> &FreeNodeMap {
        &self.map
    }

    /// `H(u)` for `u` given on the free nodes.
    pub fn h(&self, u_free: &[f64], threshold: f64) -> SparseMatrix<f64> {
        let u = self.map.scatter(u_free);
        let mut h = SparseMatrix::<f64>::zeros(self.pattern.clone());
        for (t, tet) in self.mesh.tets().iter().enumerate() {
            let g = &self.geometry[t];
            let grad = g.gradient(tet.map(|v| u[v]));
            let (_, _, c) = pm_r(crate::geometry::norm(grad), threshold);
            let local = tet.map(|v| self.map.param_index(v));
            let k = &self.stiffness[t];
            for a in 0..4 {
                let Some(i) = local[a] else { continue };
                for b in 0..4 {
                    let Some(j) = local[b] else { continue };
                    h.add(i, j, c * k[a][b]);
                }
            }
        }
        h
    }

    pub fn build(&self, params: &LogParams, config: &PriorConfig) -> Result<PriorMatrix> {
        config.validate()?;
        if params.len() != self.map.len() {
            return Err(Error::Dimension(format!(
                "{} parameters for {} free nodes",
                params.len(),
                self.map.len()
            )));
        }
        let hs = self.h(&params.sigma, config.threshold);
        let mut hv = self.h(&params.upsilon, config.threshold);
        for v in hv.values_mut() {
            *v *= config.ratio_b_over_a;
        }
        let chol_sigma = hs.cholesky()?;
        let chol_upsilon = hv.cholesky()?;
        Ok(PriorMatrix {
            sigma_block: hs,
            upsilon_block: hv,
            chol_sigma,
            chol_upsilon,
        })
    }
}

/// `H(u)` on the free nodes of `map`.
pub fn assemble_h(mesh: &Mesh, u_free: &[f64], threshold: f64, map: &FreeNodeMap) -> Result<SparseMatrix<f64>> {
    Ok(PriorModel::new(mesh, map.clone())?.h(u_free, threshold))
}

/// Block-diagonal `diag(H(ς), (b/a) H(v))` with its factorizations.
pub fn build_prior(mesh: &Mesh, params: &LogParams, map: &FreeNodeMap, config: &PriorConfig) -> Result<PriorMatrix> {
    PriorModel::new(mesh, map.clone())?.build(params, config)
}

pub struct PriorMatrix {
    sigma_block: SparseMatrix<f64>,
    upsilon_block: SparseMatrix<f64>,
    chol_sigma: Cholesky,
    chol_upsilon: Cholesky,
}

impl PriorMatrix {
    /// Dimension `2N`.
    pub fn dim(&self) -> usize {
        2 * self.sigma_block.dim()
    }

    pub fn sigma_block(&self) -> &SparseMatrix<f64> {
        &self.sigma_block
    }

    pub fn upsilon_block(&self) -> &SparseMatrix<f64> {
        &self.upsilon_block
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.sigma_block.dim();
        assert_eq!(x.len(), 2 * n);
        let mut y = self.sigma_block.mul_vec(&x[..n]);
        y.extend(self.upsilon_block.mul_vec(&x[n..]));
        y
    }

    /// `H⁻¹ x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let n = self.sigma_block.dim();
        assert_eq!(x.len(), 2 * n);
        let mut y = x.to_vec();
        let (a, b) = y.split_at_mut(n);
        self.chol_sigma.solve_block(a);
        self.chol_upsilon.solve_block(b);
        y
    }
}
