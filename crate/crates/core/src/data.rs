//! Retained source–sensor pairs and the real stacked measurement vector.
//!
//! Retained pairs are ordered source-major: all kept sensors of source 0,
//! then of source 1, and so on. A stacked vector holds the real parts of
//! the retained measurements followed, for modulated data only, by their
//! imaginary parts in the same order.

use crate::error::{Error, Result};
use crate::forward::ComplexMeasurements;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetentionMask {
    sources: usize,
    sensors: usize,
    /// `(k, j)` pairs, sorted.
    pairs: Vec<(usize, usize)>,
}

impl RetentionMask {
    pub fn full(sources: usize, sensors: usize) -> Self {
        let pairs = (0..sources).flat_map(|k| (0..sensors).map(move |j| (k, j))).collect();
        RetentionMask {
            sources,
            sensors,
            pairs,
        }
    }

    pub fn from_pairs(sources: usize, sensors: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(&(k, j)) = pairs.iter().find(|&&(k, j)| k >= sources || j >= sensors) {
            return Err(Error::Layout(format!(
                "pair (source {k}, sensor {j}) is outside a {sources}x{sensors} layout"
            )));
        }
        Ok(RetentionMask {
            sources,
            sensors,
            pairs,
        })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    /// Retained `(source, sensor)` pairs in stacking order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn retained_for_source(&self, k: usize) -> usize {
        self.pairs.iter().filter(|p| p.0 == k).count()
    }
}

/// Whether data at this modulation carries an imaginary block.
pub fn has_imaginary_block(omega_over_c: f64) -> bool {
    omega_over_c != 0.0
}

/// Real stacking of the retained entries of `m`.
pub fn stack(m: &ComplexMeasurements, mask: &RetentionMask, imaginary: bool) -> Vec<f64> {
    let mut v: Vec<f64> = mask.pairs().iter().map(|&(k, j)| m.get(j, k).re).collect();
    if imaginary {
        v.extend(mask.pairs().iter().map(|&(k, j)| m.get(j, k).im));
    }
    v
}

/// Noisy real measurements with their diagonal noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// Stacked data `𝒱`.
    pub values: Vec<f64>,
    /// Noise standard deviations; `Γ = diag(sigma²)`.
    pub sigma: Vec<f64>,
    pub mask: RetentionMask,
    pub omega_over_c: f64,
    pub layout_hash: String,
}

impl MeasurementSet {
    pub fn new(
        values: Vec<f64>,
        sigma: Vec<f64>,
        mask: RetentionMask,
        omega_over_c: f64,
        layout_hash: String,
    ) -> Result<Self> {
        let blocks = if has_imaginary_block(omega_over_c) { 2 } else { 1 };
        if values.len() != blocks * mask.len() || sigma.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} values and {} deviations for {} retained pairs",
                values.len(),
                sigma.len(),
                mask.len()
            )));
        }
        if let Some(i) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Domain(format!("noise deviation {i} is {}", sigma[i])));
        }
        Ok(MeasurementSet {
            values,
            sigma,
            mask,
            omega_over_c,
            layout_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn imaginary(&self) -> bool {
        has_imaginary_block(self.omega_over_c)
    }

    pub fn variances(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }

    /// Stacks model measurements in this set's layout.
    pub fn stack_model(&self, m: &ComplexMeasurements) -> Vec<f64> {
        stack(m, &self.mask, self.imaginary())
    }

    /// `|Γ^{-1/2}(𝒱 − model)|`.
    pub fn whitened_misfit(&self, model: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(model)
            .zip(&self.sigma)
            .map(|((v, m), s)| ((v - m) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn stacking_order_is_source_major_then_imaginary() {
        let m = ComplexMeasurements {
            m: vec![
                vec![Complex64::new(1.0, 10.0), Complex64::new(2.0, 20.0)],
                vec![Complex64::new(3.0, 30.0), Complex64::new(4.0, 40.0)],
            ],
        };
        let mask = RetentionMask::from_pairs(2, 2, vec![(1, 0), (0, 1), (1, 1)]).unwrap();
        // m[j][k]: (k=0,j=1) = 3, (k=1,j=0) = 2, (k=1,j=1) = 4.
        assert_eq!(stack(&m, &mask, false), vec![3.0, 2.0, 4.0]);
        assert_eq!(stack(&m, &mask, true), vec![3.0, 2.0, 4.0, 30.0, 20.0, 40.0]);
    }

    #[test]
    fn set_checks_lengths_and_deviations() {
        let mask = RetentionMask::full(1, 2);
        assert!(MeasurementSet::new(vec![1.0, 2.0], vec![1.0, 1.0], mask.clone(), 0.0, String::new()).is_ok());
        assert!(MeasurementSet::new(vec![1.0, 2.0], vec![1.0, 1.0], mask.clone(), 0.1, String::new()).is_err());
        assert!(matches!(
            MeasurementSet::new(vec![1.0, 2.0], vec![1.0, 0.0], mask, 0.0, String::new()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn out_of_range_pair_rejected() {
        assert!(RetentionMask::from_pairs(2, 2, vec![(2, 0)]).is_err());
    }
}
