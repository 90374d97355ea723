//! Exp-polynomial marginal fit by Poisson regression on histogram counts:
//! counts_i ~ Poisson(n h exp(sum_k beta_k c_i^k)) at the bin centers c_i.
//!
//! The regression runs as IRLS with step-halving on an orthonormalized
//! (centered/scaled, QR-orthogonalized) polynomial basis; raw monomials of
//! degree 5+ over a dozen-unit range are numerically useless. Coefficients
//! are mapped back to the raw monomial basis for reporting, and the
//! returned density is renormalized numerically over the bin range.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::histogram::HistogramBinning;
use crate::fit::FitReport;
use crate::model::{Domain, LogMarginalModel, ModelSource};

const MAX_ITER: usize = 100;
const DEV_TOL: f64 = 1e-10;

/// Poisson deviance; the k = 0 terms contribute 2 mu.
fn deviance(counts: &[f64], mu: &[f64]) -> f64 {
    counts
        .iter()
        .zip(mu)
        .map(|(&k, &m)| {
            if k > 0.0 {
                2.0 * (k * (k / m).ln() - (k - m))
            } else {
                2.0 * m
            }
        })
        .sum()
}

/// Expand a polynomial in t = (y - center) / scale into raw y-monomials.
fn rescale_polynomial(coeffs_t: &[f64], center: f64, scale: f64) -> Vec<f64> {
    let k_max = coeffs_t.len();
    let mut out = vec![0.0; k_max];
    // (y - c)^j / s^j expanded binomially.
    for (j, &a) in coeffs_t.iter().enumerate() {
        let mut binom = 1.0f64; // C(j, r)
        for r in 0..=j {
            if r > 0 {
                binom = binom * (j - r + 1) as f64 / r as f64;
            }
            out[r] += a / scale.powi(j as i32) * binom * (-center).powi((j - r) as i32);
        }
    }
    out
}

struct IrlsFit {
    /// Linear predictor Q gamma at the bin centers (offset excluded);
    /// read by the basis-invariance test.
    #[cfg_attr(not(test), allow(dead_code))]
    eta: DVector<f64>,
    /// Coefficients in the raw monomial basis (includes the intercept).
    raw_coefficients: Vec<f64>,
    deviance: f64,
    iterations: usize,
    converged: bool,
}

fn irls(binning: &HistogramBinning, degree: usize) -> Result<IrlsFit> {
    let centers = binning.centers();
    let n_bins = centers.len();
    let counts: Vec<f64> = binning.counts().iter().map(|&c| c as f64).collect();
    let offset = (binning.n_total() as f64 * binning.bin_width()).ln();

    // Orthonormalized basis: center/scale the bin centers, then QR the
    // Vandermonde matrix. eta = Q gamma with Q^T Q = I.
    let center = centers.iter().sum::<f64>() / n_bins as f64;
    let scale = (centers.iter().map(|c| (c - center) * (c - center)).sum::<f64>()
        / n_bins as f64)
        .sqrt();
    let t: Vec<f64> = centers.iter().map(|c| (c - center) / scale).collect();
    let vander = DMatrix::from_fn(n_bins, degree + 1, |i, j| t[i].powi(j as i32));
    let qr = vander.qr();
    let q = qr.q();
    let r = qr.r();

    let mut gamma: DVector<f64> = DVector::zeros(degree + 1);
    let mut eta = &q * &gamma;
    let mut mu: Vec<f64> = eta.iter().map(|e| (offset + e).exp()).collect();
    let mut dev = deviance(&counts, &mu);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        iterations += 1;
        // Working response for the log link: z = eta + (k - mu)/mu,
        // weights W = mu.
        let mut xtwx = DMatrix::zeros(degree + 1, degree + 1);
        let mut xtwz = DVector::zeros(degree + 1);
        for i in 0..n_bins {
            let w = mu[i];
            let z = eta[i] + (counts[i] - mu[i]) / mu[i];
            let row = q.row(i);
            for a in 0..=degree {
                xtwz[a] += w * row[a] * z;
                for b in a..=degree {
                    xtwx[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..=degree {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let gamma_new = match xtwx.cholesky() {
            Some(ch) => ch.solve(&xtwz),
            None => break, // singular weighted system: report non-convergence
        };

        // Step-halving line search on the deviance.
        let direction = &gamma_new - &gamma;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &gamma + step * &direction;
            let eta_c = &q * &cand;
            let mu_c: Vec<f64> = eta_c.iter().map(|e| (offset + e).exp()).collect();
            if mu_c.iter().all(|m| m.is_finite() && *m > 0.0) {
                let dev_c = deviance(&counts, &mu_c);
                if dev_c <= dev {
                    let gain = dev - dev_c;
                    gamma = cand;
                    eta = eta_c;
                    mu = mu_c;
                    dev = dev_c;
                    accepted = true;
                    if gain <= DEV_TOL * (1.0 + dev.abs()) {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // no descent direction left: at the optimum
            break;
        }
        if converged {
            break;
        }
    }

    // Back to the raw monomial basis: solve R a = gamma for the
    // t-monomial coefficients, then expand t = (y - center)/scale.
    let coeffs_t = r
        .solve_upper_triangular(&gamma)
        .ok_or_else(|| Error::NumericalFailure {
            context: "lindsey basis map".into(),
            detail: "singular R factor".into(),
        })?;
    let raw_coefficients = rescale_polynomial(coeffs_t.as_slice(), center, scale);
    Ok(IrlsFit { eta, raw_coefficients, deviance: dev, iterations, converged })
}

/// Fit a degree-K exp-polynomial to histogram counts.
pub fn fit_lindsey(
    binning: &HistogramBinning,
    degree: usize,
) -> Result<(LogMarginalModel, FitReport)> {
    if !(1..=10).contains(&degree) {
        return Err(Error::InvalidInput(format!("degree {degree} outside 1..=10")));
    }
    if binning.nonempty_bins() < degree + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least {} nonempty bins for degree {degree}, have {}",
            degree + 2,
            binning.nonempty_bins()
        )));
    }
    let fit = irls(binning, degree)?;
    let edges = binning.bin_edges();
    let model = LogMarginalModel::polynomial_with_source(
        fit.raw_coefficients,
        Domain::Interval { lo: edges[0], hi: edges[edges.len() - 1] },
        ModelSource::Lindsey,
    )?;
    let report = FitReport {
        iterations: fit.iterations,
        final_objective: fit.deviance,
        converged: fit.converged,
        constraint_violation: 0.0,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservationSet;
    use crate::fit::histogram::bin_observations;
    use crate::numerics::norm_cdf;
    use crate::prior::{make_prior, PriorSpec};
    use crate::simulate::sample_compound;
    use crate::Family;
    use approx::assert_abs_diff_eq;

    /// Idealized N(0,2) bin counts: round(n * bin mass) at huge n.
    fn idealized_n02_binning(n_bins: usize, half_width: f64, n: f64) -> HistogramBinning {
        let lo = -half_width;
        let width = 2.0 * half_width / n_bins as f64;
        let sd = 2.0f64.sqrt();
        let mut edges = Vec::with_capacity(n_bins + 1);
        let mut counts = Vec::with_capacity(n_bins);
        for j in 0..=n_bins {
            edges.push(lo + j as f64 * width);
        }
        for j in 0..n_bins {
            let mass = norm_cdf(edges[j + 1] / sd) - norm_cdf(edges[j] / sd);
            counts.push((n * mass).round() as u64);
        }
        HistogramBinning::new(edges, counts).unwrap()
    }

    #[test]
    fn recovers_the_n02_quadratic_from_idealized_counts() {
        let b = idealized_n02_binning(60, 6.0, 1e9);
        let (model, report) = fit_lindsey(&b, 2).unwrap();
        assert!(report.converged);
        let beta = model.polynomial_coefficients().unwrap();
        // Truth: log N(0,2) density has beta_2 = -1/4, beta_1 = 0.
        assert_abs_diff_eq!(beta[2], -0.25, epsilon = 5e-3);
        assert_abs_diff_eq!(beta[1], 0.0, epsilon = 1e-3);

        // Independent oracle: weighted least squares of the exact
        // log(mass / width) values on [1, c, c^2] with count weights.
        let centers = b.centers();
        let mut s = [[0.0f64; 3]; 3];
        let mut rhs = [0.0f64; 3];
        for (i, c) in centers.iter().enumerate() {
            let k = b.counts()[i] as f64;
            if k == 0.0 {
                continue;
            }
            let target = (k / (1e9 * b.bin_width())).ln();
            let basis = [1.0, *c, c * c];
            for a in 0..3 {
                rhs[a] += k * basis[a] * target;
                for bb in 0..3 {
                    s[a][bb] += k * basis[a] * basis[bb];
                }
            }
        }
        let m = nalgebra::Matrix3::from_fn(|i, j| s[i][j]);
        let v = nalgebra::Vector3::from_row_slice(&rhs);
        let wls = m.lu().solve(&v).unwrap();
        assert_abs_diff_eq!(beta[2], wls[2], epsilon = 2e-3);
    }

    #[test]
    fn consistent_on_simulated_standard_normal_data() {
        // Marginal N(0,1) from the point-mass prior: beta_2 should land in
        // [-0.55, -0.45] at n = 10^5.
        let prior = make_prior(&PriorSpec::Point { u: 0.0 }).unwrap();
        let (_, obs) = sample_compound(&prior, 100_000, 9, Family::GaussianLocation, 1.0).unwrap();
        let b = bin_observations(&obs, 60).unwrap();
        let (model, report) = fit_lindsey(&b, 2).unwrap();
        assert!(report.converged);
        let beta2 = model.polynomial_coefficients().unwrap()[2];
        assert!((-0.55..=-0.45).contains(&beta2), "beta_2 = {beta2}");
    }

    #[test]
    fn zero_count_bins_are_fine() {
        // Two separated clusters leave interior bins empty.
        let mut values = vec![-3.0, -3.4, -2.9, -2.2, -2.6, -1.9];
        values.extend([3.0, 3.4, 2.9, 2.2, 2.6, 1.9]);
        let obs = ObservationSet::gaussian(values).unwrap();
        let b = bin_observations(&obs, 12).unwrap();
        assert!(b.counts().iter().any(|c| *c == 0));
        assert!(b.nonempty_bins() >= 4);
        let (_, report) = fit_lindsey(&b, 2).unwrap();
        assert!(report.iterations >= 1);
    }

    #[test]
    fn degree_and_bin_preconditions() {
        let obs = ObservationSet::gaussian(vec![0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        let b = bin_observations(&obs, 5).unwrap();
        assert!(fit_lindsey(&b, 0).is_err());
        assert!(fit_lindsey(&b, 11).is_err());
        assert!(fit_lindsey(&b, 9).is_err()); // needs 11 nonempty bins
    }

    #[test]
    fn raw_coefficients_describe_the_orthonormal_basis_fit() {
        // The invariance that makes the basis trick safe: exp(raw poly)
        // at the bin centers equals exp(Q gamma) from the orthonormal
        // fit, sup-norm 1e-8 on the density scale.
        let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
        let (_, obs) = sample_compound(&prior, 20_000, 13, Family::GaussianLocation, 1.0).unwrap();
        let binning = bin_observations(&obs, 60).unwrap();
        let fit = irls(&binning, 5).unwrap();
        let poly = |y: f64| fit.raw_coefficients.iter().rev().fold(0.0, |acc, b| acc * y + b);
        for (i, c) in binning.centers().iter().enumerate() {
            let via_basis = fit.eta[i].exp();
            let via_raw = poly(*c).exp();
            assert_abs_diff_eq!(via_basis, via_raw, epsilon = 1e-8);
        }
    }
}
