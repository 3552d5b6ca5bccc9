//! Priorconditioned LSQR.
//!
//! With `H = LᵀL`, plain LSQR on `min |A L⁻¹ w − ỹ|` produces iterates
//! `β = L⁻¹ w` in the Krylov spaces spanned by `H⁻¹Aᵀỹ, (H⁻¹AᵀA)H⁻¹Aᵀỹ, …`.
//! The recurrences below run directly on `β` and only ever apply `A`, `Aᵀ`
//! and `H⁻¹`: with `ṽ = L⁻¹v` and `p = Lᵀv = Hṽ`, the step
//! `αv = L⁻ᵀAᵀu − βv_prev` becomes `r = Aᵀu − βp_prev`, `z = H⁻¹r`,
//! `α² = zᵀr`, `ṽ = z/α`, `p = r/α`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, RowMatrix};
use crate::prior::PriorMatrix;

const LS_TOL: f64 = 1e-10;

/// Application of `H⁻¹` for a symmetric positive definite `H`.
pub trait PriorSolve {
    fn dim(&self) -> usize;
    fn solve(&self, x: &[f64]) -> Vec<f64>;
}

impl PriorSolve for PriorMatrix {
    fn dim(&self) -> usize {
        PriorMatrix::dim(self)
    }

    fn solve(&self, x: &[f64]) -> Vec<f64> {
        PriorMatrix::solve(self, x)
    }
}

/// Whitened Jacobian, whitened data and the prior.
pub struct LinearizedSystem<'p, P: PriorSolve + ?Sized = PriorMatrix> {
    pub a: RowMatrix,
    pub y_tilde: Vec<f64>,
    pub prior: &'p P,
}

impl<'p, P: PriorSolve + ?Sized> LinearizedSystem<'p, P> {
    pub fn new(a: RowMatrix, y_tilde: Vec<f64>, prior: &'p P) -> Result<Self> {
        if a.rows() != y_tilde.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but the data has {} entries",
                a.rows(),
                y_tilde.len()
            )));
        }
        if a.cols() != prior.dim() {
            return Err(Error::Dimension(format!(
                "A has {} columns but the prior has dimension {}",
                a.cols(),
                prior.dim()
            )));
        }
        Ok(LinearizedSystem { a, y_tilde, prior })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    Breakdown,
    /// `|Hᵀ⁻¹ Aᵀ r|` vanished relative to `|A|`: a least-squares solution.
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqrOptions {
    pub stop_level: f64,
    pub max_iter: usize,
    /// Keep every iterate in [`LsqrResult::iterates`].
    pub record_iterates: bool,
}

impl LsqrOptions {
    pub fn new(stop_level: f64, max_iter: usize) -> Self {
        LsqrOptions {
            stop_level,
            max_iter,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqrResult {
    pub beta: Vec<f64>,
    /// Residual norm estimate `|Aβ_m − ỹ|` for `m = 0, 1, …`.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub stopped_by: StopReason,
    /// `β_1, β_2, …` when requested.
    pub iterates: Vec<Vec<f64>>,
}

impl LsqrResult {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

pub fn priorconditioned_lsqr<P: PriorSolve + ?Sized>(
    sys: &LinearizedSystem<'_, P>,
    stop_level: f64,
    max_iter: usize,
) -> Result<LsqrResult> {
    priorconditioned_lsqr_with(sys, &LsqrOptions::new(stop_level, max_iter))
}

pub fn priorconditioned_lsqr_with<P: PriorSolve + ?Sized>(
    sys: &LinearizedSystem<'_, P>,
    opts: &LsqrOptions,
) -> Result<LsqrResult> {
    if !(opts.stop_level >= 0.0) {
        return Err(Error::Config(format!("stop level must be nonnegative, got {}", opts.stop_level)));
    }
    let a = &sys.a;
    let n = a.cols();
    let mut x = vec![0.0; n];
    let mut iterates = Vec::new();

    let mut u = sys.y_tilde.clone();
    let mut beta = norm(&u);
    let mut history = vec![beta];
    let done = |reason, x, history, iterations, iterates| {
        Ok(LsqrResult {
            beta: x,
            residual_history: history,
            iterations,
            stopped_by: reason,
            iterates,
        })
    };
    if beta <= opts.stop_level {
        return done(StopReason::Discrepancy, x, history, 0, iterates);
    }
    if beta == 0.0 {
        return done(StopReason::Breakdown, x, history, 0, iterates);
    }
    scale(&mut u, 1.0 / beta);
    let mut r = a.mul_t_vec(&u);
    let mut z = sys.prior.solve(&r);
    let mut alpha = dot(&z, &r).max(0.0).sqrt();
    if alpha == 0.0 {
        return done(StopReason::Breakdown, x, history, 0, iterates);
    }
    let mut v = z.clone();
    scale(&mut v, 1.0 / alpha);
    let mut p = r.clone();
    scale(&mut p, 1.0 / alpha);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm2 = alpha * alpha;

    for it in 1..=opts.max_iter {
        // βu = Aṽ − αu
        let av = a.mul_vec(&v);
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - alpha * *ui;
        }
        beta = norm(&u);
        anorm2 += beta * beta;
        let tiny = 1e-14 * anorm2.sqrt();
        let beta_zero = beta <= tiny;
        if beta_zero {
            beta = 0.0;
            alpha = 0.0;
        } else {
            scale(&mut u, 1.0 / beta);
            r = a.mul_t_vec(&u);
            for (ri, pi) in r.iter_mut().zip(&p) {
                *ri -= beta * pi;
            }
            z = sys.prior.solve(&r);
            alpha = dot(&z, &r).max(0.0).sqrt();
            anorm2 += alpha * alpha;
        }
        let alpha_zero = alpha <= tiny;

        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        let step = phi / rho;
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += step * wi;
        }
        history.push(phibar.abs());
        if opts.record_iterates {
            iterates.push(x.clone());
        }
        if phibar.abs() <= opts.stop_level {
            return done(StopReason::Discrepancy, x, history, it, iterates);
        }
        if beta_zero || alpha_zero {
            return done(StopReason::Breakdown, x, history, it, iterates);
        }
        // Normal-equation residual estimate is |φ̄ α c|.
        if alpha * c.abs() <= LS_TOL * anorm2.sqrt() {
            return done(StopReason::LeastSquares, x, history, it, iterates);
        }
        for ((vi, pi), (zi, ri)) in v.iter_mut().zip(p.iter_mut()).zip(z.iter().zip(&r)) {
            *vi = zi / alpha;
            *pi = ri / alpha;
        }
        let f = theta / rho;
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - f * *wi;
        }
    }
    done(StopReason::MaxIter, x, history, opts.max_iter, iterates)
}

fn scale(x: &mut [f64], s: f64) {
    for v in x {
        *v *= s;
    }
}

/// `A = Γ^{-1/2} J` and `ỹ = Γ^{-1/2} y` for diagonal variances `gamma`.
pub fn whiten(mut j: RowMatrix, y: &[f64], gamma: &[f64]) -> Result<(RowMatrix, Vec<f64>)> {
    if j.rows() != y.len() || gamma.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows, {} data entries, {} variances",
            j.rows(),
            y.len(),
            gamma.len()
        )));
    }
    if let Some(i) = gamma.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::Domain(format!("variance {i} is {}", gamma[i])));
    }
    let mut yt = Vec::with_capacity(y.len());
    for (i, (&yi, &g)) in y.iter().zip(gamma).enumerate() {
        let s = 1.0 / g.sqrt();
        j.scale_row(i, s);
        yt.push(yi * s);
    }
    Ok((j, yt))
}
