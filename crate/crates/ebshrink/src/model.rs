//! Evaluatable log-marginal models: l(y) = log m(y) with analytic first
//! and second derivatives, in polynomial, grid, or mixture form.

use crate::error::{Error, Result};
use crate::grid::EvaluationGrid;
use crate::numerics::{gauss_legendre, log_sum_exp, CubicSpline, LN_SQRT_2PI};
use crate::prior::MixingMeasure;

/// Where the model's numbers came from; carried through to rule metadata
/// and diagnostic annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSource {
    MixturePrior,
    Kde,
    Lindsey,
    Npmle,
    ScoreMatch,
    Manual,
}

impl std::fmt::Display for ModelSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelSource::MixturePrior => "mixture-prior",
            ModelSource::Kde => "kde",
            ModelSource::Lindsey => "lindsey",
            ModelSource::Npmle => "npmle",
            ModelSource::ScoreMatch => "scorematch",
            ModelSource::Manual => "manual",
        };
        f.write_str(s)
    }
}

/// Domain on which the model may be evaluated. Grid and most polynomial
/// models are interval-restricted; mixtures and integrable quadratics
/// live on the whole line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Real,
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    pub fn contains(&self, y: f64) -> bool {
        match self {
            Domain::Real => y.is_finite(),
            Domain::Interval { lo, hi } => y >= *lo && y <= *hi,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Representation {
    /// l(y) = beta_0 + beta_1 y + ... + beta_K y^K.
    Polynomial { coefficients: Vec<f64> },
    /// Node values interpolated by a C^2 cubic spline.
    Grid { grid: EvaluationGrid, values: Vec<f64> },
    /// Exact finite Gaussian mixture: m(y) = sum_j w_j phi_sd(y - u_j).
    Mixture { prior: MixingMeasure, noise_sd: f64 },
}

/// An evaluatable log-marginal l(y) = log m(y). `log_norm_const` is the
/// log of the integral of exp(raw l) over the domain, so the normalized
/// density exp(l(y) - log_norm_const) integrates to 1.
#[derive(Debug, Clone)]
pub struct LogMarginalModel {
    representation: Representation,
    domain: Domain,
    log_norm_const: f64,
    source: ModelSource,
    spline: Option<CubicSpline>,
}

/// Effective polynomial degree after trimming trailing exact zeros.
pub fn effective_degree(coefficients: &[f64]) -> usize {
    let mut k = coefficients.len();
    while k > 1 && coefficients[k - 1] == 0.0 {
        k -= 1;
    }
    k - 1
}

fn poly_value(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, b| acc * y + b)
}

fn poly_deriv1(c: &[f64], y: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..c.len()).rev() {
        acc = acc * y + k as f64 * c[k];
    }
    acc
}

fn poly_deriv2(c: &[f64], y: f64) -> f64 {
    let mut acc = 0.0;
    for k in (2..c.len()).rev() {
        acc = acc * y + (k * (k - 1)) as f64 * c[k];
    }
    acc
}

/// Log of the integral of exp(poly) over the real line, for polynomials
/// that actually integrate there.
fn poly_log_integral_real(c: &[f64]) -> Result<f64> {
    let deg = effective_degree(c);
    if deg < 2 || deg % 2 != 0 || c[deg] >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "exp(polynomial) of degree {deg} with leading coefficient {} does not integrate over the real line",
            c.get(deg).copied().unwrap_or(0.0)
        )));
    }
    if deg == 2 {
        // int exp(b0 + b1 y + b2 y^2) dy = exp(b0 - b1^2/(4 b2)) sqrt(pi / -b2)
        let (b0, b1, b2) = (c[0], c[1], c[2]);
        return Ok(b0 - b1 * b1 / (4.0 * b2) + 0.5 * (std::f64::consts::PI / -b2).ln());
    }
    // Higher even degree: bracket out to where the integrand is dead and
    // integrate numerically relative to the polynomial's max.
    let mut half = 8.0f64;
    let peak = |l: f64| {
        (0..=4096)
            .map(|i| poly_value(c, -l + 2.0 * l * i as f64 / 4096.0))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut top = peak(half);
    while poly_value(c, -half).max(poly_value(c, half)) > top - 750.0 && half < 1e6 {
        half *= 2.0;
        top = peak(half);
    }
    let integral = gauss_legendre(|y| (poly_value(c, y) - top).exp(), -half, half, 4096);
    Ok(top + integral.ln())
}

impl LogMarginalModel {
    /// Exact mixture-backed model; integrates to 1 over the line by
    /// construction.
    pub fn from_mixture(prior: MixingMeasure, noise_sd: f64) -> Result<Self> {
        Self::from_mixture_with_source(prior, noise_sd, ModelSource::MixturePrior)
    }

    pub(crate) fn from_mixture_with_source(
        prior: MixingMeasure,
        noise_sd: f64,
        source: ModelSource,
    ) -> Result<Self> {
        if noise_sd <= 0.0 {
            return Err(Error::InvalidInput(format!("noise_sd {noise_sd} must be positive")));
        }
        Ok(Self {
            representation: Representation::Mixture { prior, noise_sd },
            domain: Domain::Real,
            log_norm_const: 0.0,
            source,
            spline: None,
        })
    }

    /// Polynomial log-marginal, normalized over its domain.
    pub fn polynomial(coefficients: Vec<f64>, domain: Domain) -> Result<Self> {
        Self::polynomial_with_source(coefficients, domain, ModelSource::Manual)
    }

    pub(crate) fn polynomial_with_source(
        coefficients: Vec<f64>,
        domain: Domain,
        source: ModelSource,
    ) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("polynomial needs finite coefficients".into()));
        }
        let log_norm_const = match domain {
            Domain::Real => poly_log_integral_real(&coefficients)?,
            Domain::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
                }
                let top = (0..=4096)
                    .map(|i| poly_value(&coefficients, lo + (hi - lo) * i as f64 / 4096.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                let z = gauss_legendre(
                    |y| (poly_value(&coefficients, y) - top).exp(),
                    lo,
                    hi,
                    1024,
                );
                top + z.ln()
            }
        };
        Ok(Self {
            representation: Representation::Polynomial { coefficients },
            domain,
            log_norm_const,
            source,
            spline: None,
        })
    }

    /// Grid-backed model from raw node values of log m; interpolation is a
    /// C^2 cubic spline and the density is renormalized over the grid by
    /// per-interval Gauss-Legendre quadrature on the interpolant.
    pub fn from_grid(grid: EvaluationGrid, values: Vec<f64>, source: ModelSource) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "{} node values for a {}-node grid",
                values.len(),
                grid.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite log-marginal node value".into()));
        }
        let spline = CubicSpline::new(grid.lo(), grid.spacing(), values.clone());
        let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = gauss_legendre(
            |y| (spline.value(y) - top).exp(),
            grid.lo(),
            grid.hi(),
            4 * (grid.n_nodes() - 1),
        );
        Ok(Self {
            representation: Representation::Grid { grid, values },
            domain: Domain::Interval { lo: grid.lo(), hi: grid.hi() },
            log_norm_const: top + z.ln(),
            source,
            spline: Some(spline),
        })
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    pub fn source(&self) -> ModelSource {
        self.source
    }

    /// Relabel the provenance (e.g. a mixture model built from an NPMLE
    /// fit rather than a known prior).
    pub fn with_source(mut self, source: ModelSource) -> Self {
        self.source = source;
        self
    }

    /// Polynomial coefficients in the raw monomial basis, when applicable.
    pub fn polynomial_coefficients(&self) -> Option<&[f64]> {
        match &self.representation {
            Representation::Polynomial { coefficients } => Some(coefficients),
            _ => None,
        }
    }

    /// The mixture behind the model, when applicable.
    pub fn mixture(&self) -> Option<(&MixingMeasure, f64)> {
        match &self.representation {
            Representation::Mixture { prior, noise_sd } => Some((prior, *noise_sd)),
            _ => None,
        }
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        if self.domain.contains(y) {
            return Ok(());
        }
        let (lo, hi) = match self.domain {
            Domain::Real => (f64::NEG_INFINITY, f64::INFINITY),
            Domain::Interval { lo, hi } => (lo, hi),
        };
        Err(Error::DomainError { y, lo, hi })
    }

    /// Normalized log density l(y) = raw(y) - log_norm_const.
    pub fn log_density(&self, y: f64) -> Result<f64> {
        Ok(self.eval(y, 0)?)
    }

    /// Score s(y) = l'(y).
    pub fn score(&self, y: f64) -> Result<f64> {
        self.eval(y, 1)
    }

    /// Second derivative l''(y).
    pub fn curvature(&self, y: f64) -> Result<f64> {
        self.eval(y, 2)
    }

    /// l, l' or l'' at y. Order 0 is normalized; derivatives are
    /// normalization-free. Grid models refuse to extrapolate.
    pub fn eval(&self, y: f64, order: u8) -> Result<f64> {
        assert!(order <= 2, "derivative order must be 0, 1 or 2");
        self.check_domain(y)?;
        let raw = match &self.representation {
            Representation::Polynomial { coefficients } => match order {
                0 => poly_value(coefficients, y),
                1 => poly_deriv1(coefficients, y),
                _ => poly_deriv2(coefficients, y),
            },
            Representation::Grid { .. } => {
                let s = self.spline.as_ref().expect("grid model carries its spline");
                match order {
                    0 => s.value(y),
                    1 => s.deriv1(y),
                    _ => s.deriv2(y),
                }
            }
            Representation::Mixture { prior, noise_sd } => {
                mixture_eval(prior, *noise_sd, y, order)
            }
        };
        Ok(if order == 0 { raw - self.log_norm_const } else { raw })
    }

    /// Numerical mass of the normalized density over its (effective)
    /// domain: a self-check used by tests and diagnostics.
    pub fn mass(&self) -> f64 {
        let (lo, hi) = match self.domain {
            Domain::Interval { lo, hi } => (lo, hi),
            Domain::Real => match &self.representation {
                Representation::Mixture { prior, noise_sd } => (
                    prior.support().first().unwrap() - 10.0 * noise_sd,
                    prior.support().last().unwrap() + 10.0 * noise_sd,
                ),
                _ => (-64.0, 64.0),
            },
        };
        gauss_legendre(
            |y| self.eval(y, 0).map(f64::exp).unwrap_or(0.0),
            lo,
            hi,
            4096,
        )
    }
}

/// Mixture log-marginal and derivatives, all in log space:
///   l   = LSE_j [ log w_j + log phi_sd(y - u_j) ]
///   l'  = E_p[(u - y)] / sd^2
///   l'' = Var_p[(u - y)] / sd^4 - 1/sd^2
/// with p the posterior atom weights at y.
fn mixture_eval(prior: &MixingMeasure, noise_sd: f64, y: f64, order: u8) -> f64 {
    let inv_var = 1.0 / (noise_sd * noise_sd);
    let log_terms: Vec<f64> = prior
        .support()
        .iter()
        .zip(prior.weights())
        .map(|(u, w)| {
            if *w > 0.0 {
                let d = (y - u) / noise_sd;
                w.ln() - 0.5 * d * d - noise_sd.ln() - LN_SQRT_2PI
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    if order == 0 {
        return log_sum_exp(&log_terms);
    }
    let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // Degenerate tail: score toward the nearest atom with unit-slope
        // curvature floor, consistent with the extreme-input fallback.
        return if order == 1 { 0.0 } else { -inv_var };
    }
    let p: Vec<f64> = log_terms.iter().map(|lt| (lt - m).exp()).collect();
    let total: f64 = p.iter().sum();
    let t: Vec<f64> = prior
        .support()
        .iter()
        .map(|u| (u - y) * inv_var)
        .collect();
    let e1: f64 = p.iter().zip(&t).map(|(pj, tj)| pj * tj).sum::<f64>() / total;
    if order == 1 {
        return e1;
    }
    let e2: f64 = p.iter().zip(&t).map(|(pj, tj)| pj * tj * tj).sum::<f64>() / total;
    (e2 - e1 * e1) - inv_var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{make_prior, PriorSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn point_mixture_is_the_standard_normal() {
        let prior = make_prior(&PriorSpec::Point { u: 0.0 }).unwrap();
        let m = LogMarginalModel::from_mixture(prior, 1.0).unwrap();
        assert_abs_diff_eq!(m.eval(0.0, 0).unwrap(), -LN_SQRT_2PI, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eval(0.0, 1).unwrap(), 0.0, epsilon = 1e-12);
        for y in [-3.0, 0.4, 2.2] {
            assert_abs_diff_eq!(m.eval(y, 2).unwrap(), -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.eval(y, 0).unwrap(), -0.5 * y * y - LN_SQRT_2PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_gaussian_prior_gives_n02_curvature() {
        // A finely discretized N(0,1) prior at unit noise has marginal
        // close to N(0,2), whose log density has constant curvature -1/2.
        // The equi-probability discretization loses a little tail
        // variance, so the atom count has to be generous for 1e-3.
        let prior = make_prior(&PriorSpec::Gaussian { mean: 0.0, sd: 1.0, n_atoms: 4001 }).unwrap();
        let m = LogMarginalModel::from_mixture(prior, 1.0).unwrap();
        for y in [-2.0, -0.5, 0.0, 1.0, 2.5] {
            assert_abs_diff_eq!(m.eval(y, 2).unwrap(), -0.5, epsilon = 1e-3);
        }
    }

    #[test]
    fn tweedie_identity_holds_on_mixtures() {
        use crate::oracle::oracle_posterior_mean;
        let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
        let m = LogMarginalModel::from_mixture(prior.clone(), 1.0).unwrap();
        for y in [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0] {
            let lhs = oracle_posterior_mean(&prior, y, 1.0);
            let rhs = y + m.eval(y, 1).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn polynomial_evaluation_and_derivatives() {
        let m = LogMarginalModel::polynomial(vec![0.3, 0.0, -0.5], Domain::Real).unwrap();
        // derivative of -y^2/2 at y = 3 is -3
        assert_abs_diff_eq!(m.eval(3.0, 1).unwrap(), -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eval(3.0, 2).unwrap(), -1.0, epsilon = 1e-12);
        // Normalized: this is exactly N(0,1) regardless of beta_0.
        assert_abs_diff_eq!(m.eval(0.0, 0).unwrap(), -LN_SQRT_2PI, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn nonintegrable_polynomials_need_an_interval() {
        assert!(LogMarginalModel::polynomial(vec![0.0, 1.0], Domain::Real).is_err());
        assert!(LogMarginalModel::polynomial(vec![0.0, 0.0, 0.0, 0.1], Domain::Real).is_err());
        let m = LogMarginalModel::polynomial(
            vec![0.0, 1.0],
            Domain::Interval { lo: -1.0, hi: 1.0 },
        )
        .unwrap();
        assert_abs_diff_eq!(m.mass(), 1.0, epsilon = 1e-9);
        assert!(m.eval(2.0, 0).is_err());
    }

    #[test]
    fn quartic_with_negative_leading_term_normalizes_on_the_line() {
        let m = LogMarginalModel::polynomial(vec![0.0, 0.0, 0.0, 0.0, -0.1], Domain::Real).unwrap();
        assert_abs_diff_eq!(m.mass(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn grid_model_interpolates_a_known_curvature() {
        // Sample l(y) = -y^2/4 - log Z: curvature -1/2 everywhere.
        let grid = EvaluationGrid::new(-8.0, 8.0, 401).unwrap();
        let values: Vec<f64> = grid.nodes().iter().map(|y| -y * y / 4.0).collect();
        let m = LogMarginalModel::from_grid(grid, values, ModelSource::Manual).unwrap();
        assert_abs_diff_eq!(m.eval(0.0, 2).unwrap(), -0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(m.mass(), 1.0, epsilon = 1e-6);
        assert!(m.eval(9.0, 0).is_err(), "no silent extrapolation");
    }

    #[test]
    fn derivatives_match_central_differences_at_o_h2() {
        let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.3 }).unwrap();
        let m = LogMarginalModel::from_mixture(prior, 1.0).unwrap();
        for y in [-1.2, 0.0, 1.7] {
            for h in [1e-3, 1e-4] {
                let fd1 =
                    (m.eval(y + h, 0).unwrap() - m.eval(y - h, 0).unwrap()) / (2.0 * h);
                let err1 = (m.eval(y, 1).unwrap() - fd1).abs();
                assert!(err1 <= 10.0 * h * h + 1e-10, "order-1 error {err1} at h={h}");
                let fd2 = (m.eval(y + h, 0).unwrap() - 2.0 * m.eval(y, 0).unwrap()
                    + m.eval(y - h, 0).unwrap())
                    / (h * h);
                let err2 = (m.eval(y, 2).unwrap() - fd2).abs();
                assert!(err2 <= 100.0 * h * h + 1e-7, "order-2 error {err2} at h={h}");
            }
        }
    }

    #[test]
    fn effective_degree_trims_trailing_zeros() {
        assert_eq!(effective_degree(&[1.0, 2.0, 0.0, 0.0]), 1);
        assert_eq!(effective_degree(&[1.0]), 0);
        assert_eq!(effective_degree(&[0.0, 0.0, -0.5]), 2);
    }
}
