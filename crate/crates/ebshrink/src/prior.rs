//! Discrete mixing measures (priors over the latent means) and the
//! descriptor vocabulary used to construct them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::norm_quantile;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A discrete prior F: atoms `support[j]` with probabilities `weights[j]`.
///
/// Continuous priors enter the toolkit only through equi-probability
/// discretizations (see [`PriorSpec`]), which keeps every downstream
/// posterior computation exact for the measure actually represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
    label: String,
}

impl MixingMeasure {
    /// Build from atoms. Atoms are sorted; exact duplicates are merged by
    /// summing their weights; weights are renormalized if their sum is
    /// within 1e-12 of 1 and rejected otherwise.
    pub fn new(
        support: Vec<f64>,
        weights: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::InvalidDescriptor(
                "support and weights must be nonempty and of equal length".into(),
            ));
        }
        if support.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidDescriptor("non-finite support point".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDescriptor("negative or non-finite weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDescriptor(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        let mut atoms: Vec<(f64, f64)> = support.into_iter().zip(weights).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (u, w) in atoms {
            match merged.last_mut() {
                Some((lu, lw)) if *lu == u => *lw += w,
                _ => merged.push((u, w)),
            }
        }
        let (support, mut weights): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self { support, weights, label: label.into() })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Mean of the mixing measure.
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| u * w)
            .sum()
    }

    /// Variance of the mixing measure.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * (u - m) * (u - m))
            .sum()
    }

    /// New measure with every support point shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            support: self.support.iter().map(|u| u + c).collect(),
            weights: self.weights.clone(),
            label: format!("{}+{}", self.label, c),
        }
    }

    /// Drop atoms with weight below `min_weight` and renormalize.
    pub fn pruned(&self, min_weight: f64) -> Self {
        let kept: Vec<(f64, f64)> = self
            .support
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w >= min_weight)
            .map(|(u, w)| (*u, *w))
            .collect();
        if kept.is_empty() {
            return self.clone();
        }
        let total: f64 = kept.iter().map(|(_, w)| w).sum();
        Self {
            support: kept.iter().map(|(u, _)| *u).collect(),
            weights: kept.iter().map(|(_, w)| w / total).collect(),
            label: self.label.clone(),
        }
    }
}

/// Prior descriptor: the JSON-serializable vocabulary accepted by
/// [`make_prior`]. Continuous shapes carry an atom count for their
/// equi-probability discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// Point mass at `u`.
    Point { u: f64 },
    /// Two atoms: weight `p` at `a`, weight `1 - p` at `b`.
    TwoPoint { a: f64, b: f64, p: f64 },
    /// N(mean, sd^2) discretized to `n_atoms` equi-probability atoms.
    Gaussian { mean: f64, sd: f64, n_atoms: usize },
    /// Spike at 0 with probability `p0`; N(0, slab_sd^2) slab discretized
    /// to `n_atoms` equi-probability atoms carrying the rest.
    SpikeSlab { p0: f64, slab_sd: f64, n_atoms: usize },
}

/// Atoms of the N(mean, sd^2) equi-probability discretization: quantiles
/// at (j - 1/2)/n for j = 1..n, each with mass 1/n.
fn gaussian_atoms(mean: f64, sd: f64, n_atoms: usize) -> Vec<f64> {
    (1..=n_atoms)
        .map(|j| mean + sd * norm_quantile((j as f64 - 0.5) / n_atoms as f64))
        .collect()
}

/// Construct a [`MixingMeasure`] from a descriptor.
pub fn make_prior(spec: &PriorSpec) -> Result<MixingMeasure> {
    match spec {
        PriorSpec::Point { u } => MixingMeasure::new(vec![*u], vec![1.0], format!("point({u})")),
        PriorSpec::TwoPoint { a, b, p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidDescriptor(format!(
                    "two-point weight p={p} outside [0, 1]"
                )));
            }
            if a == b {
                return Err(Error::InvalidDescriptor(
                    "two-point atoms must be distinct".into(),
                ));
            }
            MixingMeasure::new(
                vec![*a, *b],
                vec![*p, 1.0 - *p],
                format!("two-point({a};{b};{p})"),
            )
        }
        PriorSpec::Gaussian { mean, sd, n_atoms } => {
            if *sd <= 0.0 {
                return Err(Error::InvalidDescriptor(format!("nonpositive sd {sd}")));
            }
            if *n_atoms < 1 {
                return Err(Error::InvalidDescriptor("n_atoms < 1".into()));
            }
            let support = gaussian_atoms(*mean, *sd, *n_atoms);
            let w = 1.0 / *n_atoms as f64;
            MixingMeasure::new(
                support,
                vec![w; *n_atoms],
                format!("gaussian({mean};{sd};{n_atoms})"),
            )
        }
        PriorSpec::SpikeSlab { p0, slab_sd, n_atoms } => {
            if !(0.0..=1.0).contains(p0) {
                return Err(Error::InvalidDescriptor(format!(
                    "spike probability p0={p0} outside [0, 1]"
                )));
            }
            if *slab_sd <= 0.0 {
                return Err(Error::InvalidDescriptor(format!(
                    "nonpositive slab sd {slab_sd}"
                )));
            }
            if *n_atoms < 1 {
                return Err(Error::InvalidDescriptor("n_atoms < 1".into()));
            }
            // An odd atom count puts a slab quantile exactly at 0; the
            // constructor merges it into the spike.
            let mut support = vec![0.0];
            let mut weights = vec![*p0];
            let slab_w = (1.0 - p0) / *n_atoms as f64;
            for u in gaussian_atoms(0.0, *slab_sd, *n_atoms) {
                support.push(u);
                weights.push(slab_w);
            }
            MixingMeasure::new(
                support,
                weights,
                format!("spike-slab({p0};{slab_sd};{n_atoms})"),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn point_prior_is_degenerate() {
        let f = make_prior(&PriorSpec::Point { u: 0.0 }).unwrap();
        assert_eq!(f.support(), &[0.0]);
        assert_eq!(f.weights(), &[1.0]);
    }

    #[test]
    fn two_point_prior_by_construction() {
        let f = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
        assert_eq!(f.support(), &[-2.0, 2.0]);
        assert_eq!(f.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn gaussian_five_atoms_sit_at_odd_decile_quantiles() {
        // Independent reference: standard-normal quantiles at
        // 0.1/0.3/0.5/0.7/0.9 from published tables.
        let f = make_prior(&PriorSpec::Gaussian { mean: 0.0, sd: 1.0, n_atoms: 5 }).unwrap();
        let expected = [
            -1.2815515655446004,
            -0.5244005127080407,
            0.0,
            0.5244005127080407,
            1.2815515655446004,
        ];
        assert_eq!(f.len(), 5);
        for (got, want) in f.support().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-8);
        }
        for w in f.weights() {
            assert_abs_diff_eq!(*w, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn spike_slab_merges_the_central_slab_atom() {
        let f = make_prior(&PriorSpec::SpikeSlab { p0: 0.9, slab_sd: 3.0, n_atoms: 5 }).unwrap();
        // 5 slab atoms, one of which lands exactly at 0 and merges with
        // the spike.
        assert_eq!(f.len(), 5);
        let total: f64 = f.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let center = f.support().iter().position(|u| *u == 0.0).unwrap();
        assert_abs_diff_eq!(f.weights()[center], 0.9 + 0.1 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_descriptors_are_rejected() {
        assert!(make_prior(&PriorSpec::Gaussian { mean: 0.0, sd: -1.0, n_atoms: 5 }).is_err());
        assert!(make_prior(&PriorSpec::Gaussian { mean: 0.0, sd: 1.0, n_atoms: 0 }).is_err());
        assert!(make_prior(&PriorSpec::TwoPoint { a: 0.0, b: 1.0, p: 1.5 }).is_err());
        assert!(make_prior(&PriorSpec::SpikeSlab { p0: -0.1, slab_sd: 1.0, n_atoms: 3 }).is_err());
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(MixingMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6], "bad").is_err());
        assert!(MixingMeasure::new(vec![0.0, 1.0], vec![0.5, -0.5], "bad").is_err());
    }

    #[test]
    fn descriptor_json_round_trip() {
        let spec = PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"two-point\""));
        let back: PriorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
