//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known; a typo is an error rather than a silently ignored setting.
//! [`RunConfig::to_text`] writes the effective configuration, which parses
//! back to the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::Bands;
use crate::mesh::{PatchLayout, Shape};
use crate::prior::PriorConfig;
use crate::recon::{ReconConfig, Unknowns};
use crate::sim::{NoiseModel, Preset, BALL_MASK_DISTANCE, CYLINDER_MASK_DISTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Cylinder,
    Ball,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Cylinder => "cylinder",
            Domain::Ball => "ball",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cylinder" => Ok(Domain::Cylinder),
            "ball" => Ok(Domain::Ball),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownsKind {
    Both,
    Absorption,
    Diffusivity,
}

impl UnknownsKind {
    fn name(self) -> &'static str {
        match self {
            UnknownsKind::Both => "both",
            UnknownsKind::Absorption => "absorption",
            UnknownsKind::Diffusivity => "diffusivity",
        }
    }
}

impl FromStr for UnknownsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(UnknownsKind::Both),
            "absorption" => Ok(UnknownsKind::Absorption),
            "diffusivity" => Ok(UnknownsKind::Diffusivity),
            other => Err(Error::Config(format!("unknown `unknowns` value `{other}`"))),
        }
    }
}

/// Settings of every subcommand. Unset optional keys fall back to values
/// derived from the preset or domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    /// Mesh for the background fit; the reconstruction mesh when unset.
    pub background_mesh: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub domain: Option<Domain>,
    pub h: f64,
    pub radius: Option<f64>,
    pub height: f64,

    pub preset: Preset,
    pub patch_radius: Option<f64>,
    pub d_mask: Option<f64>,
    pub omega_over_c: f64,
    pub seed: u64,
    pub noise_rel: f64,
    pub covariance_rel: f64,

    pub threshold: f64,
    pub ratio: f64,
    pub tau: f64,
    pub max_outer: usize,
    pub lsqr_max_iter: usize,
    pub stall_rounds: usize,
    pub unknowns: UnknownsKind,
    pub fixed_kappa: Option<f64>,
    pub fixed_mu: Option<f64>,
    pub background_kappa: Option<f64>,
    pub background_mu: Option<f64>,

    pub band_kappa: f64,
    pub band_mu: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let prior = PriorConfig::default();
        let recon = ReconConfig::default();
        let noise = NoiseModel::default();
        let bands = Bands::default();
        RunConfig {
            mesh: None,
            data: None,
            solution: None,
            background_mesh: None,
            out: None,
            domain: None,
            h: 0.1,
            radius: None,
            height: 1.0,
            preset: Preset::Case2,
            patch_radius: None,
            d_mask: None,
            omega_over_c: 0.0,
            seed: noise.seed,
            noise_rel: noise.noise_rel,
            covariance_rel: noise.covariance_rel,
            threshold: prior.threshold,
            ratio: prior.ratio_b_over_a,
            tau: recon.tau,
            max_outer: recon.max_outer,
            lsqr_max_iter: recon.lsqr_max_iter,
            stall_rounds: recon.stall_rounds,
            unknowns: UnknownsKind::Both,
            fixed_kappa: None,
            fixed_mu: None,
            background_kappa: None,
            background_mu: None,
            band_kappa: bands.kappa,
            band_mu: bands.mu,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            c.set_pair(line).map_err(|e| e.context(format!("config line {}", i + 1)))?;
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = || Some(PathBuf::from(v));
        match key {
            "mesh" => self.mesh = path(),
            "data" => self.data = path(),
            "solution" => self.solution = path(),
            "background_mesh" => self.background_mesh = path(),
            "out" => self.out = path(),
            "domain" => self.domain = Some(value(key, v)?),
            "h" => self.h = value(key, v)?,
            "radius" => self.radius = Some(value(key, v)?),
            "height" => self.height = value(key, v)?,
            "preset" => self.preset = value(key, v)?,
            "patch_radius" => self.patch_radius = Some(value(key, v)?),
            "d_mask" => self.d_mask = Some(value(key, v)?),
            "omega_over_c" => self.omega_over_c = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            "noise_rel" => self.noise_rel = value(key, v)?,
            "covariance_rel" => self.covariance_rel = value(key, v)?,
            "threshold" => self.threshold = value(key, v)?,
            "ratio" => self.ratio = value(key, v)?,
            "tau" => self.tau = value(key, v)?,
            "max_outer" => self.max_outer = value(key, v)?,
            "lsqr_max_iter" => self.lsqr_max_iter = value(key, v)?,
            "stall_rounds" => self.stall_rounds = value(key, v)?,
            "unknowns" => self.unknowns = value(key, v)?,
            "fixed_kappa" => self.fixed_kappa = Some(value(key, v)?),
            "fixed_mu" => self.fixed_mu = Some(value(key, v)?),
            "background_kappa" => self.background_kappa = Some(value(key, v)?),
            "background_mu" => self.background_mu = Some(value(key, v)?),
            "band_kappa" => self.band_kappa = value(key, v)?,
            "band_mu" => self.band_mu = value(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every setting, optional ones only when set.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        let p = |x: &PathBuf| x.display().to_string();
        for (k, v) in [
            ("mesh", &self.mesh),
            ("data", &self.data),
            ("solution", &self.solution),
            ("background_mesh", &self.background_mesh),
            ("out", &self.out),
        ] {
            if let Some(v) = v {
                put(k, p(v));
            }
        }
        if let Some(d) = self.domain {
            put("domain", d.name().into());
        }
        put("h", self.h.to_string());
        if let Some(r) = self.radius {
            put("radius", r.to_string());
        }
        put("height", self.height.to_string());
        put("preset", self.preset.name().into());
        for (k, v) in [
            ("patch_radius", self.patch_radius),
            ("d_mask", self.d_mask),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("omega_over_c", self.omega_over_c.to_string());
        put("seed", self.seed.to_string());
        put("noise_rel", self.noise_rel.to_string());
        put("covariance_rel", self.covariance_rel.to_string());
        put("threshold", self.threshold.to_string());
        put("ratio", self.ratio.to_string());
        put("tau", self.tau.to_string());
        put("max_outer", self.max_outer.to_string());
        put("lsqr_max_iter", self.lsqr_max_iter.to_string());
        put("stall_rounds", self.stall_rounds.to_string());
        put("unknowns", self.unknowns.name().into());
        for (k, v) in [
            ("fixed_kappa", self.fixed_kappa),
            ("fixed_mu", self.fixed_mu),
            ("background_kappa", self.background_kappa),
            ("background_mu", self.background_mu),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("band_kappa", self.band_kappa.to_string());
        put("band_mu", self.band_mu.to_string());
        s
    }

    pub fn domain(&self) -> Domain {
        self.domain.unwrap_or(if self.preset.is_ball() { Domain::Ball } else { Domain::Cylinder })
    }

    pub fn shape(&self) -> Shape {
        match self.domain() {
            Domain::Cylinder => Shape::Cylinder {
                radius: self.radius.unwrap_or(1.0),
                height: self.height,
            },
            Domain::Ball => Shape::Ball {
                radius: self.radius.unwrap_or(10.0),
            },
        }
    }

    pub fn layout(&self) -> PatchLayout {
        let mut layout = match self.domain() {
            Domain::Cylinder => PatchLayout::cylinder_default(),
            Domain::Ball => PatchLayout::ball_default(),
        };
        if let Some(r) = self.patch_radius {
            match &mut layout {
                PatchLayout::CylinderRings { patch_radius, .. } | PatchLayout::BallEven { patch_radius, .. } => {
                    *patch_radius = r
                }
                PatchLayout::Explicit { .. } => {}
            }
        }
        layout
    }

    pub fn mask_distance(&self) -> f64 {
        self.d_mask.unwrap_or(match self.domain() {
            Domain::Cylinder => CYLINDER_MASK_DISTANCE,
            Domain::Ball => BALL_MASK_DISTANCE,
        })
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            noise_rel: self.noise_rel,
            covariance_rel: self.covariance_rel,
            seed: self.seed,
        }
    }

    pub fn bands(&self) -> Bands {
        Bands {
            kappa: self.band_kappa,
            mu: self.band_mu,
        }
    }

    pub fn recon(&self) -> Result<ReconConfig> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("unknowns={} requires `{key}`", self.unknowns.name())))
        };
        let unknowns = match self.unknowns {
            UnknownsKind::Both => Unknowns::Both,
            UnknownsKind::Absorption => Unknowns::Absorption {
                kappa: need(self.fixed_kappa, "fixed_kappa")?,
            },
            UnknownsKind::Diffusivity => Unknowns::Diffusivity {
                mu: need(self.fixed_mu, "fixed_mu")?,
            },
        };
        let background = match (self.background_kappa, self.background_mu) {
            (Some(k), Some(m)) => Some((k, m)),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "background_kappa and background_mu must be given together".into(),
                ))
            }
        };
        let c = ReconConfig {
            prior: PriorConfig {
                threshold: self.threshold,
                ratio_b_over_a: self.ratio,
            },
            tau: self.tau,
            max_outer: self.max_outer,
            lsqr_max_iter: self.lsqr_max_iter,
            unknowns,
            background,
            stall_rounds: self.stall_rounds,
            ..ReconConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    /// Path under `key`, or a config error naming the key.
    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_an_error() {
        let err = RunConfig::parse("tau=1.3\ntua=1.5\n").unwrap_err();
        assert_eq!(err.tag(), "config");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn effective_config_roundtrips() {
        let mut c = RunConfig::parse("mesh=a.msh\npreset=case4\nomega_over_c=0.021\nseed=7\nthreshold=0.002\n").unwrap();
        c.fixed_mu = Some(0.025);
        c.unknowns = UnknownsKind::Diffusivity;
        c.ratio = 1.0 / 3.0;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.domain(), Domain::Ball);
        assert_eq!(c.mask_distance(), BALL_MASK_DISTANCE);
    }

    #[test]
    fn single_unknown_needs_its_fixed_value() {
        let mut c = RunConfig::default();
        c.set("unknowns", "absorption").unwrap();
        assert!(c.recon().is_err());
        c.set("fixed_kappa", "0.05").unwrap();
        assert_eq!(c.recon().unwrap().unknowns, Unknowns::Absorption { kappa: 0.05 });
    }

    #[test]
    fn bad_value_names_the_key() {
        let err = RunConfig::parse("seed=-1").unwrap_err();
        assert!(err.to_string().contains("`seed`"), "{err}");
    }
}
