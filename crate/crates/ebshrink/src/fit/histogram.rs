//! Histogram binning for the Poisson-regression estimator.

use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};

/// Equal-width binning of an observation set; counts conserve n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBinning {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    n_total: u64,
}

impl HistogramBinning {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::InvalidInput("need k+1 edges for k bins".into()));
        }
        if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("bin edges must be strictly increasing".into()));
        }
        let n_total = counts.iter().sum();
        Ok(Self { bin_edges, counts, n_total })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn nonempty_bins(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }
}

/// Equal-width bins spanning [min - 0.05 range, max + 0.05 range].
/// Every observation lands strictly inside, so counts conserve n.
pub fn bin_observations(obs: &ObservationSet, n_bins: usize) -> Result<HistogramBinning> {
    if n_bins < 3 {
        return Err(Error::InvalidInput(format!("need >= 3 bins, got {n_bins}")));
    }
    let (min, max) = (obs.min(), obs.max());
    let range = max - min;
    if range == 0.0 {
        return Err(Error::DegenerateRange);
    }
    let lo = min - 0.05 * range;
    let hi = max + 0.05 * range;
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &y in obs.values() {
        let j = (((y - lo) / width).floor() as usize).min(n_bins - 1);
        counts[j] += 1;
    }
    let edges = (0..=n_bins).map(|j| lo + j as f64 * width).collect();
    HistogramBinning::new(edges, counts)
}
