//! Outer linearization loop with Morozov termination.
//!
//! Each round linearizes at `β⁽ˡ⁾`, freezes the prior weight there, and runs
//! priorconditioned LSQR on `Γ^{-1/2}(J β − (𝒱 − ℳ(β⁽ˡ⁾) + J β⁽ˡ⁾))` until
//! the residual estimate drops to `τε`. The nonlinear residual of the new
//! iterate decides whether to stop.

mod background;

pub use background::{
    check_layout, estimate_background, estimate_background_with, homogeneous_misfit, BackgroundEstimate,
};

use crate::data::MeasurementSet;
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::krylov::{priorconditioned_lsqr, whiten, LinearizedSystem, PriorSolve, StopReason};
use crate::linalg::{Cholesky, RowMatrix};
use crate::mesh::{Mesh, PatchSet};
use crate::prior::{PriorConfig, PriorModel};
use crate::sensitivity::{jacobian_from_fields, LogParams};

/// Which nodes carry the homogeneous Dirichlet condition of the prior.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DirichletPolicy {
    /// All nodes touched by a source or sensor patch.
    #[default]
    Patches,
    Nodes(Vec<usize>),
}

/// Coefficients to reconstruct; a fixed coefficient keeps its known value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Unknowns {
    #[default]
    Both,
    Absorption {
        kappa: f64,
    },
    Diffusivity {
        mu: f64,
    },
}

impl Unknowns {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            Unknowns::Both => return Ok(()),
            Unknowns::Absorption { kappa } => kappa,
            Unknowns::Diffusivity { mu } => mu,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("fixed coefficient must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub prior: PriorConfig,
    pub tau: f64,
    pub max_outer: usize,
    pub lsqr_max_iter: usize,
    pub dirichlet: DirichletPolicy,
    pub unknowns: Unknowns,
    /// Skips background estimation when set.
    pub background: Option<(f64, f64)>,
    /// Consecutive linearizations without a new best residual before the
    /// loop gives up; 0 disables the check.
    pub stall_rounds: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            prior: PriorConfig::default(),
            tau: 1.3,
            max_outer: 10,
            lsqr_max_iter: 200,
            dirichlet: DirichletPolicy::Patches,
            unknowns: Unknowns::Both,
            background: None,
            stall_rounds: 3,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.unknowns.validate()?;
        if !(self.tau >= 1.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be at least 1, got {}", self.tau)));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        if self.lsqr_max_iter == 0 {
            return Err(Error::Config("lsqr_max_iter must be at least 1".into()));
        }
        if let Some((k, m)) = self.background {
            if !(k > 0.0 && m > 0.0 && k.is_finite() && m.is_finite()) {
                return Err(Error::Config(format!("background ({k}, {m}) must be positive")));
            }
        }
        Ok(())
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Residual at or below `τε`.
    Converged,
    MaxOuter,
    /// `stall_rounds` linearizations in a row failed to improve the best
    /// residual.
    Stalled,
    /// The update left the admissible set or the forward solve failed; the
    /// message carries the cause.
    Breakdown(String),
}

#[derive(Debug, Clone)]
pub struct LsqrRound {
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub stopped_by: StopReason,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub params: LogParams,
    /// Nodal `κ`, with `κ₀` on the Dirichlet nodes.
    pub kappa_field: Vec<f64>,
    pub mu_field: Vec<f64>,
    /// Whitened misfit of the background model.
    pub initial_residual: f64,
    /// Whitened misfit after each linearization.
    pub outer_residuals: Vec<f64>,
    pub lsqr_rounds: Vec<LsqrRound>,
    pub converged: bool,
    pub termination: Termination,
    pub epsilon: f64,
    pub tau: f64,
    /// Set when the background was estimated rather than given.
    pub background: Option<BackgroundEstimate>,
}

impl ReconResult {
    pub fn lsqr_histories(&self) -> Vec<&[f64]> {
        self.lsqr_rounds.iter().map(|r| r.residual_history.as_slice()).collect()
    }

    pub fn final_residual(&self) -> f64 {
        *self.outer_residuals.last().unwrap_or(&self.initial_residual)
    }
}

/// `ε = √n` for `n` retained real entries, the expected whitened noise norm.
pub fn morozov_level(data: &MeasurementSet) -> f64 {
    (data.len() as f64).sqrt()
}

pub fn reconstruct(data: &MeasurementSet, mesh: &Mesh, patches: &PatchSet, config: &ReconConfig) -> Result<ReconResult> {
    config.validate()?;
    check_layout(data, patches)?;
    let patches = match &config.dirichlet {
        DirichletPolicy::Patches => patches.clone(),
        DirichletPolicy::Nodes(n) => patches.clone().with_dirichlet(mesh, n.clone())?,
    };
    let (kappa0, mu0, estimate) = match config.background {
        Some((k, m)) => match config.unknowns {
            Unknowns::Both => (k, m, None),
            Unknowns::Absorption { kappa } => (kappa, m, None),
            Unknowns::Diffusivity { mu } => (k, mu, None),
        },
        None => {
            let e = estimate_background_with(data, mesh, &patches, config.unknowns)?;
            log::info!("background kappa0 {:.6e} mu0 {:.6e}", e.kappa0, e.mu0);
            (e.kappa0, e.mu0, Some(e))
        }
    };
    let omega = data.omega_over_c;
    let map = patches.free_nodes(mesh);
    let model = ForwardModel::new(mesh);
    let prior_model = PriorModel::new(mesh, map.clone())?;
    let epsilon = morozov_level(data);
    let stop = config.tau * epsilon;
    let variances = data.variances();
    let ctx = |l: usize| move |e: Error| e.context(format!("outer iteration {l}"));

    let mut params = LogParams::zeros(map.len(), kappa0, mu0);
    let mut coeff = params.coefficients(&map, omega)?;
    let mut fields = model.fields(&coeff, &patches).map_err(ctx(0))?;
    let mut model_data = data.stack_model(&crate::forward::compute_measurements(&fields, &patches));
    let initial_residual = data.whitened_misfit(&model_data);
    log::info!("outer 0 residual {initial_residual:.6e} target {stop:.6e}");

    let mut outer_residuals = Vec::new();
    let mut lsqr_rounds = Vec::new();
    let mut best = (initial_residual, params.clone());
    let mut since_best = 0;
    let mut termination = if initial_residual <= stop {
        Termination::Converged
    } else {
        Termination::MaxOuter
    };
    let mut l = 0;
    while termination != Termination::Converged && l < config.max_outer {
        l += 1;
        let jac = jacobian_from_fields(&model, &fields, &coeff, &map, &data.mask);
        let j = if data.imaginary() { jac.matrix } else { jac.real_rows() };
        let j = active_columns(j, config.unknowns);
        let beta = active(&params, config.unknowns);
        let jb = j.mul_vec(&beta);
        let y: Vec<f64> = data
            .values
            .iter()
            .zip(&model_data)
            .zip(&jb)
            .map(|((v, m), b)| v - m + b)
            .collect();
        let (a, y_tilde) = whiten(j, &y, &variances)?;
        let inner = match config.unknowns {
            Unknowns::Both => {
                let prior = prior_model.build(&params, &config.prior).map_err(ctx(l))?;
                priorconditioned_lsqr(&LinearizedSystem::new(a, y_tilde, &prior)?, stop, config.lsqr_max_iter)?
            }
            _ => {
                // The scale of a single block does not change the iterates.
                let h = prior_model.h(&beta, config.prior.threshold).cholesky().map_err(ctx(l))?;
                let prior = SingleBlock(h);
                priorconditioned_lsqr(&LinearizedSystem::new(a, y_tilde, &prior)?, stop, config.lsqr_max_iter)?
            }
        };
        if inner.stopped_by != StopReason::Discrepancy {
            log::warn!(
                "outer {l}: LSQR stopped by {:?} at {:.6e} after {} steps",
                inner.stopped_by,
                inner.final_residual(),
                inner.iterations
            );
        }
        let next = from_active(&inner.beta, config.unknowns, kappa0, mu0);
        lsqr_rounds.push(LsqrRound {
            residual_history: inner.residual_history,
            iterations: inner.iterations,
            stopped_by: inner.stopped_by,
        });

        // Out-of-range coefficients or a failed solve end the run; everything
        // else propagates.
        let evaluated = next
            .coefficients(&map, omega)
            .and_then(|c| model.fields(&c, &patches).map(|f| (c, f)));
        let (c, f) = match evaluated {
            Ok(v) => v,
            Err(e @ (Error::Domain(_) | Error::Solver(_))) => {
                log::warn!("outer {l}: {e}; stopping");
                termination = Termination::Breakdown(e.to_string());
                break;
            }
            Err(e) => return Err(ctx(l)(e)),
        };
        params = next;
        coeff = c;
        fields = f;
        model_data = data.stack_model(&crate::forward::compute_measurements(&fields, &patches));
        let r = data.whitened_misfit(&model_data);
        log::info!("outer {l} residual {r:.6e} lsqr steps {}", lsqr_rounds[l - 1].iterations);
        outer_residuals.push(r);
        if r < best.0 {
            best = (r, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if r <= stop {
            termination = Termination::Converged;
        } else if config.stall_rounds > 0 && since_best >= config.stall_rounds {
            log::warn!("outer {l}: no improvement in {since_best} linearizations");
            termination = Termination::Stalled;
            break;
        }
    }
    let converged = termination == Termination::Converged;
    if !converged {
        log::warn!("stopped after {l} linearizations ({termination:?}); returning the best iterate");
        params = best.1;
    }
    Ok(ReconResult {
        kappa_field: params.kappa(&map),
        mu_field: params.mu(&map),
        params,
        initial_residual,
        outer_residuals,
        lsqr_rounds,
        converged,
        termination,
        epsilon,
        tau: config.tau,
        background: estimate,
    })
}

fn active(params: &LogParams, unknowns: Unknowns) -> Vec<f64> {
    match unknowns {
        Unknowns::Both => params.beta(),
        Unknowns::Absorption { .. } => params.upsilon.clone(),
        Unknowns::Diffusivity { .. } => params.sigma.clone(),
    }
}

fn from_active(beta: &[f64], unknowns: Unknowns, kappa0: f64, mu0: f64) -> LogParams {
    let n = match unknowns {
        Unknowns::Both => beta.len() / 2,
        _ => beta.len(),
    };
    let mut p = LogParams::zeros(n, kappa0, mu0);
    match unknowns {
        Unknowns::Both => {
            p.sigma.copy_from_slice(&beta[..n]);
            p.upsilon.copy_from_slice(&beta[n..]);
        }
        Unknowns::Absorption { .. } => p.upsilon.copy_from_slice(beta),
        Unknowns::Diffusivity { .. } => p.sigma.copy_from_slice(beta),
    }
    p
}

fn active_columns(j: RowMatrix, unknowns: Unknowns) -> RowMatrix {
    let n = j.cols() / 2;
    let offset = match unknowns {
        Unknowns::Both => return j,
        Unknowns::Absorption { .. } => n,
        Unknowns::Diffusivity { .. } => 0,
    };
    RowMatrix::from_fn(j.rows(), n, |r, c| j.get(r, offset + c))
}

struct SingleBlock(Cholesky);

impl PriorSolve for SingleBlock {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn solve(&self, x: &[f64]) -> Vec<f64> {
        self.0.solve(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{define_patches, generate_primitive, PatchLayout, Shape};
    use crate::sim::{add_noise, mask_nearest_sensors, simulate_measurements, NoiseModel, Phantom};

    fn small() -> (Mesh, PatchSet) {
        let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.3).unwrap();
        let ps = define_patches(
            &mesh,
            &PatchLayout::CylinderRings {
                sources: 4,
                sensors: 4,
                patch_radius: 0.15,
                ring_heights: vec![0.3, 0.7],
            },
        )
        .unwrap();
        (mesh, ps)
    }

    fn noiseless(mesh: &Mesh, ps: &PatchSet, phantom: &Phantom, omega: f64) -> MeasurementSet {
        let mask = mask_nearest_sensors(ps, 0.0).unwrap();
        let noise = NoiseModel {
            noise_rel: 0.0,
            ..NoiseModel::default()
        };
        simulate_measurements(mesh, phantom, ps, omega, &mask, &noise).unwrap().data
    }

    #[test]
    fn background_recovered_from_homogeneous_data() {
        let (mesh, ps) = small();
        for omega in [0.0, 0.021] {
            let data = noiseless(&mesh, &ps, &Phantom::homogeneous(0.05, 0.5), omega);
            let e = estimate_background(&data, &mesh, &ps).unwrap();
            assert!(e.converged);
            assert!((e.kappa0 / 0.05 - 1.0).abs() < 1e-3, "{e:?}");
            assert!((e.mu0 / 0.5 - 1.0).abs() < 1e-3, "{e:?}");
        }
    }

    #[test]
    fn scaled_covariance_gives_same_background() {
        let (mesh, ps) = small();
        let data = noiseless(&mesh, &ps, &Phantom::homogeneous(0.08, 0.3), 0.0);
        let (values, sigma, _) = add_noise(
            &data.values,
            &NoiseModel {
                seed: 3,
                ..NoiseModel::default()
            },
        );
        let a = MeasurementSet::new(values, sigma, data.mask.clone(), 0.0, data.layout_hash.clone()).unwrap();
        // Scaling Γ alone scales the misfit; the data must stay in model units.
        let mut b = a.clone();
        b.sigma.iter_mut().for_each(|s| *s *= 7.0);
        let ea = estimate_background(&a, &mesh, &ps).unwrap();
        let eb = estimate_background(&b, &mesh, &ps).unwrap();
        assert!((ea.kappa0 / eb.kappa0 - 1.0).abs() < 1e-6, "{ea:?} {eb:?}");
        assert!((ea.mu0 / eb.mu0 - 1.0).abs() < 1e-6);
        assert!((ea.misfit / eb.misfit - 7.0).abs() < 1e-9);
    }

    #[test]
    fn homogeneous_data_needs_at_most_two_linearizations() {
        let (mesh, ps) = small();
        let data = noiseless(&mesh, &ps, &Phantom::homogeneous(0.05, 0.5), 0.0);
        let r = reconstruct(&data, &mesh, &ps, &ReconConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.outer_residuals.len() <= 2);
        assert!(r.params.beta().iter().all(|b| b.abs() <= 1e-2));
        assert!(r.final_residual() <= r.tau * r.epsilon);
    }

    #[test]
    fn zero_beta_maps_to_background() {
        let (mesh, ps) = small();
        let map = ps.free_nodes(&mesh);
        let p = LogParams::zeros(map.len(), 0.07, 0.4);
        assert!(p.kappa(&map).iter().all(|&k| k == 0.07));
        assert!(p.mu(&map).iter().all(|&m| m == 0.4));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = ReconConfig {
            tau: 0.9,
            ..ReconConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.tau = 1.3;
        c.max_outer = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn morozov_counts_retained_entries() {
        let (mesh, ps) = small();
        let data = noiseless(&mesh, &ps, &Phantom::homogeneous(0.05, 0.5), 0.021);
        assert_eq!(morozov_level(&data), (2.0 * 16.0f64).sqrt());
    }
}
