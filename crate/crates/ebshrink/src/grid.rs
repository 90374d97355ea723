//! Equally spaced evaluation grids.

use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};

/// An equally spaced grid of `n_nodes >= 3` points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    lo: f64,
    hi: f64,
    n_nodes: usize,
}

impl EvaluationGrid {
    pub fn new(lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        if n_nodes < 3 {
            return Err(Error::InvalidGrid(format!("need >= 3 nodes, got {n_nodes}")));
        }
        Ok(Self { lo, hi, n_nodes })
    }

    /// Default plug-in grid: 401 nodes on [min(y) - 4 sigma, max(y) + 4 sigma],
    /// wide enough to cover derivative stencils around every observation.
    pub fn default_for(obs: &ObservationSet) -> Result<Self> {
        let pad = 4.0 * obs.noise_sd();
        Self::new(obs.min() - pad, obs.max() + pad, 401)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Node spacing h = (hi - lo) / (n_nodes - 1).
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|j| self.node(j)).collect()
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }
}
