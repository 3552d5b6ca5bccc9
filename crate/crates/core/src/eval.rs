//! Quantitative comparison of a reconstruction with a known phantom.

use std::fmt::{self, Write as _};

use crate::geometry::{self, Point};
use crate::mesh::Mesh;
use crate::recon::ReconResult;
use crate::sim::Phantom;

/// Half-widths of the "background" bands for thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub kappa: f64,
    pub mu: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Bands { kappa: 0.01, mu: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamReport {
    pub true_centroid: Option<Point>,
    /// `None` when the thresholded support is empty.
    pub estimated_centroid: Option<Point>,
    pub centroid_error: Option<f64>,
    /// Mean and standard deviation outside every true inclusion.
    pub background_mean: f64,
    pub background_std: f64,
    pub min: f64,
    pub max: f64,
    /// Reconstructed extremum over the true contrast, both from the true
    /// background.
    pub peak_fraction: Option<f64>,
    /// Largest deviation from the reconstructed background on the support
    /// of the other coefficient alone, over this coefficient's true
    /// contrast.
    pub cross_talk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub converged: bool,
    pub linearizations: usize,
    pub final_residual: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kappa: ParamReport,
    pub mu: ParamReport,
    pub convergence: Option<ConvergenceSummary>,
}

/// Evaluates nodal fields against `truth` on the same mesh, thresholding at
/// the reconstructed background `(κ₀, μ₀)`.
pub fn evaluate_fields(
    mesh: &Mesh,
    kappa: &[f64],
    mu: &[f64],
    background: (f64, f64),
    truth: &Phantom,
    bands: Bands,
) -> EvalReport {
    let (tk, tm) = truth.evaluate(mesh);
    let weights = mesh.nodal_volumes();
    let k_support: Vec<bool> = tk.iter().map(|&v| v != truth.kappa_bg).collect();
    let m_support: Vec<bool> = tm.iter().map(|&v| v != truth.mu_bg).collect();
    let k_only: Vec<bool> = k_support.iter().zip(&m_support).map(|(&a, &b)| a && !b).collect();
    let m_only: Vec<bool> = m_support.iter().zip(&k_support).map(|(&a, &b)| a && !b).collect();
    let outside: Vec<bool> = k_support.iter().zip(&m_support).map(|(&a, &b)| !a && !b).collect();
    let ctx = Context {
        mesh,
        weights: &weights,
        outside: &outside,
    };
    let kc = contrast(truth.kappa_bg, truth.inclusions.iter().filter_map(|i| i.kappa));
    let mc = contrast(truth.mu_bg, truth.inclusions.iter().filter_map(|i| i.mu));
    EvalReport {
        kappa: ctx.report(kappa, truth.kappa_bg, background.0, kc, bands.kappa, &k_support, &m_only),
        mu: ctx.report(mu, truth.mu_bg, background.1, mc, bands.mu, &m_support, &k_only),
        convergence: None,
    }
}

pub fn evaluate(result: &ReconResult, truth: &Phantom, mesh: &Mesh, bands: Bands) -> EvalReport {
    let mut r = evaluate_fields(
        mesh,
        &result.kappa_field,
        &result.mu_field,
        (result.params.kappa0, result.params.mu0),
        truth,
        bands,
    );
    r.convergence = Some(ConvergenceSummary {
        converged: result.converged,
        linearizations: result.outer_residuals.len(),
        final_residual: result.final_residual(),
        target: result.tau * result.epsilon,
    });
    r
}

/// Inclusion value minus background with the largest magnitude.
fn contrast(bg: f64, values: impl Iterator<Item = f64>) -> Option<f64> {
    values
        .map(|v| v - bg)
        .filter(|c| *c != 0.0)
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
}

struct Context<'a> {
    mesh: &'a Mesh,
    weights: &'a [f64],
    outside: &'a [bool],
}

impl Context<'_> {
    fn centroid(&self, mask: impl Fn(usize) -> bool) -> Option<Point> {
        let mut sum = [0.0; 3];
        let mut w = 0.0;
        for (n, p) in self.mesh.vertices().iter().enumerate() {
            if mask(n) {
                sum = geometry::add(sum, geometry::scale(*p, self.weights[n]));
                w += self.weights[n];
            }
        }
        (w > 0.0).then(|| geometry::scale(sum, 1.0 / w))
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        field: &[f64],
        true_bg: f64,
        rec_bg: f64,
        contrast: Option<f64>,
        band: f64,
        support: &[bool],
        other_only: &[bool],
    ) -> ParamReport {
        let detected = |n: usize| {
            let d = field[n] - rec_bg;
            match contrast {
                Some(c) if c > 0.0 => d > band,
                Some(_) => d < -band,
                None => d.abs() > band,
            }
        };
        let true_centroid = self.centroid(|n| support[n]);
        let estimated_centroid = self.centroid(detected);
        let centroid_error = match (true_centroid, estimated_centroid) {
            (Some(t), Some(e)) => Some(geometry::distance(t, e)),
            _ => None,
        };

        let bgv: Vec<f64> = (0..field.len()).filter(|&n| self.outside[n]).map(|n| field[n]).collect();
        let (background_mean, background_std) = if bgv.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let m = bgv.iter().sum::<f64>() / bgv.len() as f64;
            let v = bgv.iter().map(|x| (x - m).powi(2)).sum::<f64>() / bgv.len() as f64;
            (m, v.sqrt())
        };
        let min = field.iter().copied().fold(f64::INFINITY, f64::min);
        let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let peak_fraction = contrast.map(|c| {
            let ext = if c > 0.0 { max } else { min };
            (ext - true_bg) / c
        });
        let cross_talk = contrast.and_then(|c| {
            let dev = (0..field.len())
                .filter(|&n| other_only[n])
                .map(|n| (field[n] - rec_bg).abs())
                .fold(None, |a: Option<f64>, d| Some(a.map_or(d, |a| a.max(d))));
            dev.map(|d| d / c.abs())
        });
        ParamReport {
            true_centroid,
            estimated_centroid,
            centroid_error,
            background_mean,
            background_std,
            min,
            max,
            peak_fraction,
            cross_talk,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "not_detected".to_string(), |v| format!("{v:.9e}"))
}

fn opt_point(x: Option<Point>) -> String {
    x.map_or_else(
        || "not_detected".to_string(),
        |p| format!("{:.9e} {:.9e} {:.9e}", p[0], p[1], p[2]),
    )
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (name, p) in [("kappa", &self.kappa), ("mu", &self.mu)] {
            let _ = writeln!(s, "{name}.true_centroid={}", opt_point(p.true_centroid));
            let _ = writeln!(s, "{name}.estimated_centroid={}", opt_point(p.estimated_centroid));
            let _ = writeln!(s, "{name}.centroid_error={}", opt(p.centroid_error));
            let _ = writeln!(s, "{name}.background_mean={:.9e}", p.background_mean);
            let _ = writeln!(s, "{name}.background_std={:.9e}", p.background_std);
            let _ = writeln!(s, "{name}.min={:.9e}", p.min);
            let _ = writeln!(s, "{name}.max={:.9e}", p.max);
            let _ = writeln!(s, "{name}.peak_fraction={}", opt(p.peak_fraction));
            let _ = writeln!(s, "{name}.cross_talk={}", opt(p.cross_talk));
        }
        if let Some(c) = &self.convergence {
            let _ = writeln!(s, "converged={}", c.converged);
            let _ = writeln!(s, "linearizations={}", c.linearizations);
            let _ = writeln!(s, "final_residual={:.9e}", c.final_residual);
            let _ = writeln!(s, "target={:.9e}", c.target);
        }
        f.write_str(&s)
    }
}
