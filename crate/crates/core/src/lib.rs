//! Edge-preserving reconstruction for diffuse optical tomography.
//!
//! The forward model is the frequency-domain diffusion approximation with a
//! Robin boundary, discretized with P1 finite elements on tetrahedral meshes.
//! Both the diffusivity `κ` and the absorption `μ` are recovered, through the
//! log parametrization `κ = κ0 e^ς`, `μ = μ0 e^v`, by a Gauss–Newton-type
//! outer loop. Each linearization is solved by LSQR preconditioned with the
//! lagged-diffusivity matrix of a Perona–Malik functional and stopped by the
//! discrepancy principle.
//!
//! Module map:
//! - [`mesh`]: meshes, generators, Gmsh I/O, source and sensor patches.
//! - [`forward`]: system assembly, factorization and the measurement map.
//! - [`sensitivity`]: adjoint Jacobian and its products.
//! - [`prior`]: the Perona–Malik functional and its matrix `H(u)`.
//! - [`krylov`]: priorconditioned LSQR.
//! - [`recon`]: background estimation and the outer loop.
//! - [`sim`]: phantoms, masks and noisy synthetic data.
//! - [`eval`], [`io`], [`vtk`], [`config`], [`cli`]: reporting, file formats
//!   and the `dot` command line.

pub mod error;
pub mod geometry;
pub mod linalg;

pub mod mesh;
pub mod forward;
pub mod data;
pub mod sensitivity;
pub mod prior;
pub mod krylov;
pub mod sim;
pub mod recon;
pub mod eval;

pub mod io;
pub mod vtk;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
