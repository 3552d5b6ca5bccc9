//! Phantoms, nearest-sensor masking and synthetic noisy measurements.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{has_imaginary_block, stack, MeasurementSet, RetentionMask};
use crate::error::{Error, Result};
use crate::forward::{CoefficientField, ForwardModel};
use crate::geometry::{self, Point};
use crate::mesh::{Mesh, PatchSet};

/// Masking distance that drops the three or four sensors nearest to each
/// source of the default cylinder layout.
pub const CYLINDER_MASK_DISTANCE: f64 = 0.5;

/// Masking distance that drops the five or six sensors around each source
/// of the default ball layout.
pub const BALL_MASK_DISTANCE: f64 = 5.0;

#[derive(Clone)]
pub enum InclusionShape {
    /// Vertical cylinder with axis through `(axis[0], axis[1])`.
    Cylinder {
        axis: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
    /// Points within `radius` of a polyline.
    Tube { path: Vec<Point>, radius: f64 },
    Indicator(Arc<dyn Fn(Point) -> bool + Send + Sync>),
}

impl fmt::Debug for InclusionShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InclusionShape::Cylinder {
                axis,
                radius,
                z_min,
                z_max,
            } => write!(f, "Cylinder {{ axis: {axis:?}, radius: {radius}, z: [{z_min}, {z_max}] }}"),
            InclusionShape::Tube { path, radius } => write!(f, "Tube {{ path: {path:?}, radius: {radius} }}"),
            InclusionShape::Indicator(_) => f.write_str("Indicator"),
        }
    }
}

impl InclusionShape {
    pub fn contains(&self, x: Point) -> bool {
        match self {
            InclusionShape::Cylinder {
                axis,
                radius,
                z_min,
                z_max,
            } => (x[0] - axis[0]).hypot(x[1] - axis[1]) <= *radius && x[2] >= *z_min && x[2] <= *z_max,
            InclusionShape::Tube { path, radius } => path
                .windows(2)
                .any(|s| segment_distance(x, s[0], s[1]) <= *radius),
            InclusionShape::Indicator(f) => f(x),
        }
    }
}

fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let ab = geometry::sub(b, a);
    let t = (geometry::dot(geometry::sub(x, a), ab) / geometry::dot(ab, ab)).clamp(0.0, 1.0);
    geometry::distance(x, geometry::add(a, geometry::scale(ab, t)))
}

/// An inclusion overrides the background of the coefficients it sets.
#[derive(Debug, Clone)]
pub struct Inclusion {
    pub shape: InclusionShape,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub kappa_bg: f64,
    pub mu_bg: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    pub fn homogeneous(kappa_bg: f64, mu_bg: f64) -> Self {
        Phantom {
            kappa_bg,
            mu_bg,
            inclusions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = [Some(self.kappa_bg), Some(self.mu_bg)]
            .into_iter()
            .chain(self.inclusions.iter().flat_map(|i| [i.kappa, i.mu]))
            .flatten();
        for v in values {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("phantom value {v} is not positive")));
            }
        }
        Ok(())
    }

    pub fn kappa_at(&self, x: Point) -> f64 {
        self.inclusions
            .iter()
            .filter(|i| i.shape.contains(x))
            .filter_map(|i| i.kappa)
            .next_back()
            .unwrap_or(self.kappa_bg)
    }

    pub fn mu_at(&self, x: Point) -> f64 {
        self.inclusions
            .iter()
            .filter(|i| i.shape.contains(x))
            .filter_map(|i| i.mu)
            .next_back()
            .unwrap_or(self.mu_bg)
    }

    /// Nodal `(κ, μ)` on `mesh`.
    pub fn evaluate(&self, mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
        let k = mesh.vertices().iter().map(|&x| self.kappa_at(x)).collect();
        let m = mesh.vertices().iter().map(|&x| self.mu_at(x)).collect();
        (k, m)
    }

    pub fn coefficients(&self, mesh: &Mesh, omega_over_c: f64) -> Result<CoefficientField> {
        let (k, m) = self.evaluate(mesh);
        CoefficientField::new(k, m, omega_over_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Absorption inclusion only.
    Case1Mu,
    /// Diffusivity inclusion only.
    Case1Kappa,
    /// Both cylinder inclusions.
    Case2,
    /// Twisted tubes in the radius-10 ball.
    Case4,
    /// Background only.
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1Mu => "case1_mu",
            Preset::Case1Kappa => "case1_kappa",
            Preset::Case2 => "case2",
            Preset::Case4 => "case4",
            Preset::Custom => "custom",
        }
    }

    pub fn is_ball(self) -> bool {
        self == Preset::Case4
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "case1_mu" => Preset::Case1Mu,
            "case1_kappa" => Preset::Case1Kappa,
            "case2" => Preset::Case2,
            "case4" => Preset::Case4,
            "custom" => Preset::Custom,
            other => return Err(Error::Config(format!("unknown phantom preset `{other}`"))),
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const CYL_MU: f64 = 0.5;
const CYL_KAPPA: f64 = 0.05;

fn mu_cylinder() -> Inclusion {
    Inclusion {
        shape: InclusionShape::Cylinder {
            axis: [0.4, 0.0],
            radius: 0.2,
            z_min: 0.0,
            z_max: 0.6,
        },
        kappa: None,
        mu: Some(2.5),
    }
}

fn kappa_cylinder() -> Inclusion {
    Inclusion {
        shape: InclusionShape::Cylinder {
            axis: [-0.4, 0.0],
            radius: 0.2,
            z_min: 0.4,
            z_max: 1.0,
        },
        kappa: Some(0.25),
        mu: None,
    }
}

/// Preset phantom, checked against the extent of `mesh`. `Custom` gives
/// the unit-cylinder background on any mesh.
pub fn build_phantom(preset: Preset, mesh: &Mesh) -> Result<Phantom> {
    let (rxy, zmin, zmax, r3) = extent(mesh);
    let cylinder_ok = (rxy - 1.0).abs() < 0.05 && zmin.abs() < 0.05 && (zmax - 1.0).abs() < 0.05;
    let ball_ok = (r3 - 10.0).abs() < 0.5;
    let mismatch = || {
        Error::Domain(format!(
            "preset {preset} does not fit a mesh of radius {rxy:.3} and z range [{zmin:.3}, {zmax:.3}]"
        ))
    };
    let mut p = Phantom::homogeneous(CYL_KAPPA, CYL_MU);
    match preset {
        Preset::Case1Mu | Preset::Case1Kappa | Preset::Case2 if !cylinder_ok => return Err(mismatch()),
        Preset::Case4 if !ball_ok => return Err(mismatch()),
        Preset::Case1Mu => p.inclusions.push(mu_cylinder()),
        Preset::Case1Kappa => p.inclusions.push(kappa_cylinder()),
        Preset::Case2 => {
            p.inclusions.push(mu_cylinder());
            p.inclusions.push(kappa_cylinder());
        }
        Preset::Case4 => {
            p = Phantom::homogeneous(0.15, 0.025);
            p.inclusions.push(Inclusion {
                shape: InclusionShape::Tube {
                    path: vec![[5.0, -2.5, 2.0], [0.0, -2.5, 2.0], [0.0, 2.5, 2.0], [0.0, 2.5, -3.0]],
                    radius: 1.5,
                },
                kappa: None,
                mu: Some(0.125),
            });
            p.inclusions.push(Inclusion {
                shape: InclusionShape::Tube {
                    path: vec![[-5.0, 2.5, 2.0], [0.0, 2.5, 2.0], [0.0, -2.5, 2.0], [0.0, -2.5, 7.0]],
                    radius: 1.5,
                },
                kappa: Some(0.075),
                mu: None,
            });
        }
        Preset::Custom => {}
    }
    Ok(p)
}

fn extent(mesh: &Mesh) -> (f64, f64, f64, f64) {
    let mut rxy: f64 = 0.0;
    let mut r3: f64 = 0.0;
    let mut zmin = f64::INFINITY;
    let mut zmax = f64::NEG_INFINITY;
    for p in mesh.vertices() {
        rxy = rxy.max(p[0].hypot(p[1]));
        r3 = r3.max(geometry::norm(*p));
        zmin = zmin.min(p[2]);
        zmax = zmax.max(p[2]);
    }
    (rxy, zmin, zmax, r3)
}

/// Keeps, for each source, the sensors whose centers are farther than
/// `d_mask` from the source center.
pub fn mask_nearest_sensors(patches: &PatchSet, d_mask: f64) -> Result<RetentionMask> {
    if !(d_mask >= 0.0) {
        return Err(Error::Config(format!("mask distance must be nonnegative, got {d_mask}")));
    }
    let (k, j) = (patches.source_count(), patches.sensor_count());
    let mut pairs = Vec::new();
    for (ks, src) in patches.sources.iter().enumerate() {
        let before = pairs.len();
        for (js, sen) in patches.sensors.iter().enumerate() {
            if d_mask == 0.0 || geometry::distance(src.center, sen.center) > d_mask {
                pairs.push((ks, js));
            }
        }
        if pairs.len() == before {
            return Err(Error::Layout(format!(
                "mask distance {d_mask} removes every sensor of source {ks}"
            )));
        }
    }
    RetentionMask::from_pairs(k, j, pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Relative deviation of the drawn noise.
    pub noise_rel: f64,
    /// Relative deviation defining `Γ`.
    pub covariance_rel: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            noise_rel: 0.01,
            covariance_rel: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: MeasurementSet,
    /// Noise-free stacked measurements.
    pub exact: Vec<f64>,
    /// Entries whose deviation fell back to the median rule.
    pub zero_fallbacks: usize,
}

/// Forward simulation of `phantom` on `mesh`, masking and seeded noise.
pub fn simulate_measurements(
    mesh: &Mesh,
    phantom: &Phantom,
    patches: &PatchSet,
    omega_over_c: f64,
    mask: &RetentionMask,
    noise: &NoiseModel,
) -> Result<Simulation> {
    phantom.validate()?;
    if !(noise.noise_rel >= 0.0) {
        return Err(Error::Config(format!("noise level must be nonnegative, got {}", noise.noise_rel)));
    }
    if !(noise.covariance_rel > 0.0) {
        return Err(Error::Config(format!(
            "covariance level must be positive, got {}",
            noise.covariance_rel
        )));
    }
    let coeff = phantom.coefficients(mesh, omega_over_c)?;
    let m = ForwardModel::new(mesh).measure(&coeff, patches)?;
    let exact = stack(&m, mask, has_imaginary_block(omega_over_c));
    let (values, sigma, zero_fallbacks) = add_noise(&exact, noise);
    if zero_fallbacks > 0 {
        log::warn!("{zero_fallbacks} exactly zero measurements use the median deviation");
    }
    let data = MeasurementSet::new(values, sigma, mask.clone(), omega_over_c, patches.layout_hash().to_string())?;
    Ok(Simulation {
        data,
        exact,
        zero_fallbacks,
    })
}

/// Noisy values and deviations for exact stacked data.
pub fn add_noise(exact: &[f64], noise: &NoiseModel) -> (Vec<f64>, Vec<f64>, usize) {
    let mut mags: Vec<f64> = exact.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let median = if mags.is_empty() { 0.0 } else { mags[mags.len() / 2] };
    let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
    let mut fallbacks = 0;
    let mut values = Vec::with_capacity(exact.len());
    let mut sigma = Vec::with_capacity(exact.len());
    for &m in exact {
        let mut scale = m.abs();
        if scale == 0.0 {
            scale = median;
            fallbacks += 1;
        }
        let scale = scale.max(1e-300);
        let z: f64 = StandardNormal.sample(&mut rng);
        values.push(m + noise.noise_rel * scale * z);
        sigma.push(noise.covariance_rel * scale);
    }
    (values, sigma, fallbacks)
}

/// Warns when the simulation mesh is not clearly finer than the
/// reconstruction mesh. Returns whether the guard holds.
pub fn inverse_crime_guard(sim_nodes: usize, recon_nodes: usize) -> bool {
    let ok = sim_nodes as f64 >= 1.5 * recon_nodes as f64;
    if !ok {
        log::warn!("simulation mesh has {sim_nodes} nodes, less than 1.5x the {recon_nodes} reconstruction nodes");
    }
    ok
}
