//! Exact posterior moments under a known discrete prior, and the cached
//! oracle rule used as the benchmark for every plug-in estimator.

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::grid::EvaluationGrid;
use crate::prior::MixingMeasure;

/// Posterior mean and variance of the latent mean given one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub var: f64,
    /// Set when the input was so extreme that every kernel weight
    /// underflowed even in log space; the moments then degrade to the
    /// nearest support point with zero variance.
    pub extreme_input: bool,
}

/// Posterior atom probabilities p_j over the prior support given y, via a
/// max-shifted softmax of log weights. Never produces NaN for finite y.
fn posterior_weights(prior: &MixingMeasure, y: f64, noise_sd: f64) -> Option<Vec<f64>> {
    let inv_two_var = 1.0 / (2.0 * noise_sd * noise_sd);
    let log_kernel: Vec<f64> = prior
        .support()
        .iter()
        .zip(prior.weights())
        .map(|(u, w)| {
            let d = y - u;
            if *w > 0.0 {
                w.ln() - d * d * inv_two_var
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = log_kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let mut p: Vec<f64> = log_kernel.iter().map(|lk| (lk - m).exp()).collect();
    let total: f64 = p.iter().sum();
    for pj in &mut p {
        *pj /= total;
    }
    Some(p)
}

/// Exact posterior mean and variance of mu given Y = y under
/// y | mu ~ N(mu, noise_sd^2) and mu ~ prior.
pub fn posterior_moments(prior: &MixingMeasure, y: f64, noise_sd: f64) -> PosteriorMoments {
    match posterior_weights(prior, y, noise_sd) {
        Some(p) => {
            let mean: f64 = prior
                .support()
                .iter()
                .zip(&p)
                .map(|(u, pj)| u * pj)
                .sum();
            let var: f64 = prior
                .support()
                .iter()
                .zip(&p)
                .map(|(u, pj)| pj * (u - mean) * (u - mean))
                .sum();
            PosteriorMoments { mean, var: var.max(0.0), extreme_input: false }
        }
        None => {
            // All kernels underflowed: fall back to the nearest atom.
            // Differences like u - y overflow out here, so locate by
            // comparison against the support range instead.
            let support = prior.support();
            let nearest = if y >= *support.last().unwrap() {
                *support.last().unwrap()
            } else if y <= support[0] {
                support[0]
            } else {
                support
                    .iter()
                    .cloned()
                    .min_by(|a, b| (a - y).abs().total_cmp(&(b - y).abs()))
                    .unwrap()
            };
            PosteriorMoments { mean: nearest, var: 0.0, extreme_input: true }
        }
    }
}

/// E(mu | Y = y): the oracle Bayes rule under squared error.
pub fn oracle_posterior_mean(prior: &MixingMeasure, y: f64, noise_sd: f64) -> f64 {
    posterior_moments(prior, y, noise_sd).mean
}

/// Var(mu | Y = y) under the discrete mixture; always >= 0.
pub fn oracle_posterior_var(prior: &MixingMeasure, y: f64, noise_sd: f64) -> f64 {
    posterior_moments(prior, y, noise_sd).var
}

/// The oracle Bayes rule with a precomputed posterior-mean table on a grid.
/// Construction verifies the gaussian-location monotonicity of the rule.
#[derive(Debug, Clone)]
pub struct OracleRule {
    prior: MixingMeasure,
    noise_sd: f64,
    grid: EvaluationGrid,
    table: Vec<f64>,
}

impl OracleRule {
    pub fn new(prior: MixingMeasure, noise_sd: f64, grid: EvaluationGrid) -> Result<Self> {
        if noise_sd <= 0.0 {
            return Err(Error::InvalidInput(format!("noise_sd {noise_sd} must be positive")));
        }
        let table: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&y| oracle_posterior_mean(&prior, y, noise_sd))
            .collect();
        // Posterior mean under a location mixture is nondecreasing in y;
        // a violation here means the moment computation is broken.
        for w in table.windows(2) {
            if w[1] < w[0] - 1e-10 {
                return Err(Error::NumericalFailure {
                    context: "oracle rule".into(),
                    detail: format!("posterior mean decreased: {} -> {}", w[0], w[1]),
                });
            }
        }
        Ok(Self { prior, noise_sd, grid, table })
    }

    pub fn prior(&self) -> &MixingMeasure {
        &self.prior
    }

    pub fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Apply the exact rule to every observation (the cached table is a
    /// monotonicity witness; application stays exact).
    pub fn apply(&self, obs: &ObservationSet) -> Vec<f64> {
        obs.values()
            .iter()
            .map(|&y| oracle_posterior_mean(&self.prior, y, self.noise_sd))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{make_prior, PriorSpec};
    use approx::assert_abs_diff_eq;

    fn two_point() -> MixingMeasure {
        make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap()
    }

    #[test]
    fn degenerate_prior_pins_the_posterior() {
        let prior = make_prior(&PriorSpec::Point { u: 0.0 }).unwrap();
        assert_eq!(oracle_posterior_mean(&prior, 5.0, 1.0), 0.0);
        let prior3 = make_prior(&PriorSpec::Point { u: 3.0 }).unwrap();
        for y in [-4.0, 0.0, 17.0] {
            assert_eq!(oracle_posterior_var(&prior3, y, 1.0), 0.0);
        }
    }

    #[test]
    fn two_point_posterior_mean_matches_closed_form() {
        // Direct summation gives 2 (phi(y-2) - phi(y+2)) / (phi(y-2) + phi(y+2))
        // = 2 tanh(2 y); both routes must agree.
        let prior = two_point();
        assert_abs_diff_eq!(oracle_posterior_mean(&prior, 0.0, 1.0), 0.0, epsilon = 1e-12);
        for y in [-1.5f64, -0.3, 0.7, 1.0, 2.9] {
            let closed = 2.0 * (2.0 * y).tanh();
            let direct = {
                let k = |u: f64| (-0.5 * (y - u) * (y - u)).exp();
                (-2.0 * k(-2.0) * 0.5 + 2.0 * k(2.0) * 0.5) / (k(-2.0) * 0.5 + k(2.0) * 0.5)
            };
            assert_abs_diff_eq!(closed, direct, epsilon = 1e-12);
            assert_abs_diff_eq!(oracle_posterior_mean(&prior, y, 1.0), closed, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(
            oracle_posterior_mean(&prior, 1.0, 1.0),
            1.9280551601516338, // 2 tanh(2)
            epsilon = 1e-12
        );
    }

    #[test]
    fn two_point_posterior_var_matches_closed_form() {
        let prior = two_point();
        // Symmetric two-point posterior at y=0: variance = 2^2.
        assert_abs_diff_eq!(oracle_posterior_var(&prior, 0.0, 1.0), 4.0, epsilon = 1e-12);
        // At y=1: 4 (1 - tanh^2(2)) = 4 sech^2(2), checked against direct
        // summation as an independent route.
        let y = 1.0;
        let closed = 4.0 * (1.0 - (2.0f64).tanh().powi(2));
        let direct = {
            let k = |u: f64| (-0.5 * (y - u) * (y - u)).exp();
            let z = k(-2.0) * 0.5 + k(2.0) * 0.5;
            let mean = (-2.0 * k(-2.0) * 0.5 + 2.0 * k(2.0) * 0.5) / z;
            (4.0 * k(-2.0) * 0.5 + 4.0 * k(2.0) * 0.5) / z - mean * mean
        };
        assert_abs_diff_eq!(closed, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(closed, 0.2826032994126567, epsilon = 1e-14);
        assert_abs_diff_eq!(oracle_posterior_var(&prior, y, 1.0), closed, epsilon = 1e-10);
    }

    #[test]
    fn extreme_inputs_degrade_to_nearest_atom_without_nan() {
        let prior = two_point();
        // Far enough that (y-u)^2 / 2 overflows any exponent budget.
        let pm = posterior_moments(&prior, 1e160, 1.0);
        assert!(pm.extreme_input);
        assert_eq!(pm.mean, 2.0);
        assert_eq!(pm.var, 0.0);
        // Large but representable inputs stay exact and unflagged.
        let pm = posterior_moments(&prior, 40.0, 1.0);
        assert!(!pm.extreme_input);
        assert_abs_diff_eq!(pm.mean, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_rule_table_is_monotone() {
        let prior = make_prior(&PriorSpec::SpikeSlab { p0: 0.8, slab_sd: 3.0, n_atoms: 41 }).unwrap();
        let grid = EvaluationGrid::new(-10.0, 10.0, 401).unwrap();
        let rule = OracleRule::new(prior, 1.0, grid).unwrap();
        assert!(rule.table().windows(2).all(|w| w[1] >= w[0] - 1e-10));
    }

    #[test]
    fn shift_equivariance_of_the_oracle_rule() {
        let prior = two_point();
        let c = 1.7;
        let shifted = prior.shifted(c);
        for y in [-3.0, -0.2, 0.9, 4.4] {
            let base = oracle_posterior_mean(&prior, y, 1.0);
            let moved = oracle_posterior_mean(&shifted, y + c, 1.0);
            assert_abs_diff_eq!(moved, base + c, epsilon = 1e-10);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_prior() -> impl Strategy<Value = MixingMeasure> {
            (2usize..6).prop_flat_map(|k| {
                (
                    proptest::collection::vec(-5.0f64..5.0, k),
                    proptest::collection::vec(0.05f64..1.0, k),
                )
                    .prop_filter_map("distinct support", |(mut support, raw_w)| {
                        support.sort_by(f64::total_cmp);
                        support.dedup();
                        if support.len() < 2 {
                            return None;
                        }
                        let total: f64 = raw_w[..support.len()].iter().sum();
                        let weights: Vec<f64> =
                            raw_w[..support.len()].iter().map(|w| w / total).collect();
                        MixingMeasure::new(support, weights, "prop").ok()
                    })
            })
        }

        proptest! {
            #[test]
            fn shift_equivariance_property(
                prior in arb_prior(),
                c in -3.0f64..3.0,
                y in -6.0f64..6.0,
            ) {
                let base = oracle_posterior_mean(&prior, y, 1.0);
                let moved = oracle_posterior_mean(&prior.shifted(c), y + c, 1.0);
                prop_assert!((moved - (base + c)).abs() < 1e-10);
            }

            #[test]
            fn posterior_mean_is_nondecreasing(prior in arb_prior()) {
                let grid = EvaluationGrid::new(-8.0, 8.0, 401).unwrap();
                let mut prev = f64::NEG_INFINITY;
                for y in grid.nodes() {
                    let m = oracle_posterior_mean(&prior, y, 1.0);
                    prop_assert!(m >= prev - 1e-10);
                    prev = m;
                }
            }
        }
    }
}
