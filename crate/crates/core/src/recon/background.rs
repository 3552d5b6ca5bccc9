//! Homogeneous background fit by Nelder–Mead in `(ln κ, ln μ)`.

use crate::data::MeasurementSet;
use crate::error::{Error, Result};
use crate::forward::{CoefficientField, ForwardModel};
use crate::mesh::{Mesh, PatchSet};

use super::Unknowns;

/// Log-grid exponents (base 10) of the seed search, per coefficient.
const GRID: [f64; 5] = [-3.0, -2.0, -1.0, 0.0, 1.0];
const MAX_EVALUATIONS: usize = 400;
/// Simplex size in log units at which the fit stops, about 1e-5 relative.
const LOG_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundEstimate {
    pub kappa0: f64,
    pub mu0: f64,
    /// Whitened misfit at the estimate.
    pub misfit: f64,
    pub evaluations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

/// Checks that `patches` produce measurements in the layout of `data`.
pub fn check_layout(data: &MeasurementSet, patches: &PatchSet) -> Result<()> {
    if data.mask.sources() != patches.source_count() || data.mask.sensors() != patches.sensor_count() {
        return Err(Error::Layout(format!(
            "data has {} sources and {} sensors, patches have {} and {}",
            data.mask.sources(),
            data.mask.sensors(),
            patches.source_count(),
            patches.sensor_count()
        )));
    }
    if data.layout_hash != patches.layout_hash() {
        return Err(Error::Layout(format!(
            "data layout hash {} differs from patch layout hash {}",
            data.layout_hash,
            patches.layout_hash()
        )));
    }
    Ok(())
}

/// Whitened misfit of the homogeneous model `(κ, μ)`.
pub fn homogeneous_misfit(
    model: &ForwardModel<'_>,
    data: &MeasurementSet,
    patches: &PatchSet,
    kappa: f64,
    mu: f64,
) -> Result<f64> {
    let coeff = CoefficientField::homogeneous(model.mesh().node_count(), kappa, mu, data.omega_over_c)?;
    let m = model.measure(&coeff, patches)?;
    Ok(data.whitened_misfit(&data.stack_model(&m)))
}

pub fn estimate_background(data: &MeasurementSet, mesh: &Mesh, patches: &PatchSet) -> Result<BackgroundEstimate> {
    estimate_background_with(data, mesh, patches, Unknowns::Both)
}

/// Background fit over the coefficients in `unknowns`; a fixed coefficient
/// keeps its given value.
pub fn estimate_background_with(
    data: &MeasurementSet,
    mesh: &Mesh,
    patches: &PatchSet,
    unknowns: Unknowns,
) -> Result<BackgroundEstimate> {
    if data.is_empty() {
        return Err(Error::Dimension("no measurements".into()));
    }
    check_layout(data, patches)?;
    let model = ForwardModel::new(mesh);
    let mut evaluations = 0;
    let mut f = |x: [f64; 2]| -> Result<f64> {
        evaluations += 1;
        homogeneous_misfit(&model, data, patches, x[0].exp(), x[1].exp())
    };
    let ln10 = std::f64::consts::LN_10;

    let fixed = match unknowns {
        Unknowns::Both => None,
        Unknowns::Absorption { kappa } => Some((0, kappa.ln())),
        Unknowns::Diffusivity { mu } => Some((1, mu.ln())),
    };
    if let Some((axis, value)) = fixed {
        let free = 1 - axis;
        let mut at = |t: f64| {
            let mut x = [0.0; 2];
            x[axis] = value;
            x[free] = t;
            f(x)
        };
        let mut seed = (0.0, f64::INFINITY);
        for &a in &GRID {
            let v = at(a * ln10)?;
            if v < seed.1 {
                seed = (a * ln10, v);
            }
        }
        let (t, misfit, converged) = golden_section(&mut at, seed.0 - ln10, seed.0 + ln10, LOG_TOL, MAX_EVALUATIONS)?;
        let mut x = [0.0; 2];
        x[axis] = value;
        x[free] = t;
        return Ok(BackgroundEstimate {
            kappa0: x[0].exp(),
            mu0: x[1].exp(),
            misfit,
            evaluations,
            converged,
        });
    }

    let mut seed = ([0.0; 2], f64::INFINITY);
    for &a in &GRID {
        for &b in &GRID {
            let x = [a * ln10, b * ln10];
            let v = f(x)?;
            if v < seed.1 {
                seed = (x, v);
            }
        }
    }

    let step = 0.5 * ln10;
    let (x0, v0) = seed;
    let mut simplex = vec![(x0, v0)];
    for d in 0..2 {
        let mut x = x0;
        x[d] += step;
        simplex.push((x, f(x)?));
    }
    let (best, converged) = nelder_mead(&mut f, simplex, LOG_TOL, MAX_EVALUATIONS)?;
    if !converged {
        log::warn!("background fit stopped at the evaluation budget");
    }
    Ok(BackgroundEstimate {
        kappa0: best.0[0].exp(),
        mu0: best.0[1].exp(),
        misfit: best.1,
        evaluations,
        converged,
    })
}

/// Minimizes a unimodal function on `[a, b]` to an interval of `tol`.
fn golden_section(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    budget: usize,
) -> Result<(f64, f64, bool)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut used = 2;
    while b - a > tol {
        if used >= budget {
            return Ok(if fc < fd { (c, fc, false) } else { (d, fd, false) });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        used += 1;
    }
    Ok(if fc < fd { (c, fc, true) } else { (d, fd, true) })
}

type Vertex = ([f64; 2], f64);

/// Standard Nelder–Mead with reflection 1, expansion 2, contraction ½ and
/// shrink ½, stopping once the simplex is within `tol` of its best vertex.
fn nelder_mead(
    f: &mut impl FnMut([f64; 2]) -> Result<f64>,
    mut s: Vec<Vertex>,
    tol: f64,
    budget: usize,
) -> Result<(Vertex, bool)> {
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let mut used = 0;
    loop {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = s[1..]
            .iter()
            .map(|v| (v.0[0] - s[0].0[0]).abs().max((v.0[1] - s[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if size <= tol {
            return Ok((s[0], true));
        }
        if used >= budget {
            return Ok((s[0], false));
        }
        let c = lerp(s[0].0, s[1].0, 0.5);
        let worst = s[2];
        let xr = lerp(worst.0, c, 2.0);
        let fr = f(xr)?;
        used += 1;
        if fr < s[0].1 {
            let xe = lerp(worst.0, c, 3.0);
            let fe = f(xe)?;
            used += 1;
            s[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[1].1 {
            s[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(c, xr, 0.5);
                (x, f(x)?)
            } else {
                let x = lerp(c, worst.0, 0.5);
                (x, f(x)?)
            };
            used += 1;
            if fc < fr.min(worst.1) {
                s[2] = (xc, fc);
            } else {
                for i in 1..3 {
                    let x = lerp(s[0].0, s[i].0, 0.5);
                    s[i] = (x, f(x)?);
                    used += 1;
                }
            }
        }
    }
}
