//! Observed data: the vector of y-values together with the likelihood
//! family it came from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Likelihood family tying observations to latent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// y | mu ~ N(mu, noise_sd^2)
    GaussianLocation,
    /// y | lambda ~ Poisson(lambda), y a nonnegative integer
    PoissonCount,
    /// y | sigma ~ sigma^{-1} p(y / sigma) for a symmetric base density p
    GaussianScale,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::GaussianLocation => "gaussian-location",
            Family::PoissonCount => "poisson-count",
            Family::GaussianScale => "gaussian-scale",
        };
        f.write_str(s)
    }
}

/// The data vector with its family tag, noise scale, and (when simulated)
/// the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    values: Vec<f64>,
    family: Family,
    noise_sd: f64,
    seed: Option<u64>,
}

impl ObservationSet {
    pub fn new(values: Vec<f64>, family: Family, noise_sd: f64, seed: Option<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidObservations("empty observation set".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservations("non-finite observation".into()));
        }
        if noise_sd <= 0.0 {
            return Err(Error::InvalidObservations(format!(
                "noise_sd must be positive, got {noise_sd}"
            )));
        }
        if family == Family::PoissonCount
            && values.iter().any(|v| *v < 0.0 || v.fract() != 0.0)
        {
            return Err(Error::InvalidObservations(
                "poisson-count values must be nonnegative integers".into(),
            ));
        }
        Ok(Self { values, family, noise_sd, seed })
    }

    /// Gaussian-location data at unit noise, the default throughout.
    pub fn gaussian(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Family::GaussianLocation, 1.0, None)
    }

    /// Poisson count data (stored as f64 but validated integral).
    pub fn poisson(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Family::PoissonCount, 1.0, None)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample standard deviation (0 for a single observation).
    pub fn sample_sd(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (self.len() - 1) as f64).sqrt()
    }
}
