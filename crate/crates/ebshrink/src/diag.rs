//! Realizability diagnostics: can a candidate marginal arise as a
//! Gaussian convolution of *any* prior?
//!
//! Three increasingly sharp necessary conditions are checked:
//! 1. Convexity of c(y) = y^2/2 + log m(y), equivalently 1 + l'' >= 0
//!    (a posterior variance cannot be negative). Necessary, not
//!    sufficient.
//! 2. Polynomial degree: a polynomial log-marginal of degree >= 3 is
//!    never a Gaussian convolution; degree 2 forces a (possibly
//!    degenerate) Gaussian prior.
//! 3. Spectral boundedness: a true convolution's Fourier transform,
//!    multiplied by the inverse Gaussian-kernel factor exp(omega^2 / 2),
//!    stays bounded (it is the prior's characteristic function). Anything
//!    that blows up under full deconvolution cannot extend to a bounded
//!    heat-equation solution and is not a convolution.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::EvaluationGrid;
use crate::model::{effective_degree, LogMarginalModel, ModelSource};

/// Tolerance below which 1 + l'' is considered genuinely negative.
pub const CONVEXITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Realizable,
    NotRealizable,
    Inconclusive,
}

/// A contiguous region where the tested quantity violates its bound,
/// with the worst value inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub verdict: Verdict,
    pub test_statistic: f64,
    pub threshold: f64,
    pub violations: Vec<Violation>,
    pub notes: String,
}

/// Evaluate the posterior-variance profile 1 + l'' over the grid and
/// collect sub-threshold runs.
fn variance_profile(
    model: &LogMarginalModel,
    grid: &EvaluationGrid,
) -> Result<(Vec<f64>, Vec<Violation>, f64, f64)> {
    let nodes = grid.nodes();
    let mut profile = Vec::with_capacity(nodes.len());
    for &y in &nodes {
        profile.push(1.0 + model.eval(y, 2)?);
    }
    let mut violations = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for (j, &pv) in profile.iter().enumerate() {
        if pv < -CONVEXITY_TOL {
            run = Some(match run {
                Some((start, worst)) => (start, worst.min(pv)),
                None => (j, pv),
            });
        } else if let Some((start, worst)) = run.take() {
            violations.push(Violation { lo: nodes[start], hi: nodes[j - 1], value: worst });
        }
    }
    if let Some((start, worst)) = run {
        violations.push(Violation { lo: nodes[start], hi: nodes[nodes.len() - 1], value: worst });
    }
    let (mut min_pv, mut argmin) = (f64::INFINITY, nodes[0]);
    for (j, &pv) in profile.iter().enumerate() {
        if pv < min_pv {
            min_pv = pv;
            argmin = nodes[j];
        }
    }
    Ok((profile, violations, min_pv, argmin))
}

/// Convexity of c(y) = y^2/2 + log m(y) over the grid. Necessary for
/// realizability, never sufficient.
pub fn convexity_check(model: &LogMarginalModel, grid: &EvaluationGrid) -> Result<DiagnosticReport> {
    let (_, violations, min_pv, _) = variance_profile(model, grid)?;
    let verdict = if min_pv < -CONVEXITY_TOL {
        Verdict::NotRealizable
    } else {
        Verdict::Realizable
    };
    let notes = match verdict {
        Verdict::NotRealizable => format!(
            "c(y) = y^2/2 + log m(y) is concave somewhere: min 1 + l'' = {min_pv:.6e}"
        ),
        _ => "c(y) = y^2/2 + log m(y) is convex on the grid; convexity is necessary, not sufficient".into(),
    };
    Ok(DiagnosticReport {
        verdict,
        test_statistic: min_pv,
        threshold: -CONVEXITY_TOL,
        violations,
        notes,
    })
}

/// The same inequality as [`convexity_check`], read as a posterior
/// variance profile: Var(mu | y) = 1 + l''(y) under a unit Gaussian
/// carrier must be nonnegative.
pub fn posterior_variance_positivity(
    model: &LogMarginalModel,
    grid: &EvaluationGrid,
) -> Result<DiagnosticReport> {
    let (_, violations, min_pv, argmin) = variance_profile(model, grid)?;
    let verdict = if min_pv < -CONVEXITY_TOL {
        Verdict::NotRealizable
    } else {
        Verdict::Realizable
    };
    Ok(DiagnosticReport {
        verdict,
        test_statistic: min_pv,
        threshold: -CONVEXITY_TOL,
        violations,
        notes: format!("posterior-variance profile minimum {min_pv:.6e} at y = {argmin:.6}"),
    })
}

/// Degree test for polynomial log-marginals.
///
/// Degree >= 3 is categorically impossible for any prior. Degree 2 is a
/// Gaussian marginal: realizable iff beta_2 lies in [-1/2, 0), with
/// beta_2 = -1/2 the degenerate (point-mass) prior and anything below it
/// a marginal narrower than the noise itself. Affine inputs (degree <= 1)
/// are read as exponential tilts of the unit Gaussian carrier, i.e. the
/// N(beta_1, 1) marginal of a point mass at beta_1.
pub fn polynomial_realizability(coefficients: &[f64]) -> Result<DiagnosticReport> {
    if coefficients.is_empty() {
        return Err(Error::InvalidInput("empty coefficient list".into()));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    let degree = effective_degree(coefficients);
    if degree >= 3 {
        return Ok(DiagnosticReport {
            verdict: Verdict::NotRealizable,
            test_statistic: degree as f64,
            threshold: 2.0,
            violations: vec![],
            notes: format!(
                "log-marginal is a degree-{degree} polynomial: no prior produces a polynomial log-marginal of degree >= 3"
            ),
        });
    }
    if degree == 2 {
        let beta2 = coefficients[2];
        let beta1 = coefficients.get(1).copied().unwrap_or(0.0);
        if beta2 == -0.5 {
            return Ok(DiagnosticReport {
                verdict: Verdict::Realizable,
                test_statistic: beta2,
                threshold: -0.5,
                violations: vec![],
                notes: format!("degenerate (point-mass) prior at {beta1}"),
            });
        }
        if (-0.5..0.0).contains(&beta2) {
            let marginal_var = -1.0 / (2.0 * beta2);
            let prior_mean = beta1 * marginal_var;
            return Ok(DiagnosticReport {
                verdict: Verdict::Realizable,
                test_statistic: beta2,
                threshold: -0.5,
                violations: vec![],
                notes: format!(
                    "Gaussian prior, mean {prior_mean}, variance {} (marginal variance {marginal_var})",
                    marginal_var - 1.0
                ),
            });
        }
        let reason = if beta2 < -0.5 {
            "marginal variance below the noise variance"
        } else {
            "positive quadratic coefficient: not integrable"
        };
        return Ok(DiagnosticReport {
            verdict: Verdict::NotRealizable,
            test_statistic: beta2,
            threshold: -0.5,
            violations: vec![],
            notes: format!("quadratic coefficient {beta2}: {reason}"),
        });
    }
    let beta1 = coefficients.get(1).copied().unwrap_or(0.0);
    Ok(DiagnosticReport {
        verdict: Verdict::Realizable,
        test_statistic: degree as f64,
        threshold: 2.0,
        violations: vec![],
        notes: format!("point-mass prior at {beta1} (marginal N({beta1}, 1))"),
    })
}

/// Configuration for the spectral deconvolution test.
#[derive(Debug, Clone, Copy)]
pub struct HeatTestConfig {
    pub grid: EvaluationGrid,
    /// Relative floor under which spectral content is treated as noise.
    pub spectral_floor: f64,
    /// Boundedness threshold tau on the deconvolved spectrum ratio.
    pub boundedness_ratio: f64,
}

impl HeatTestConfig {
    pub fn new(grid: EvaluationGrid) -> Result<Self> {
        let n = grid.n_nodes();
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "spectral grid needs a power-of-two node count >= 256, got {n}"
            )));
        }
        Ok(Self { grid, spectral_floor: 1e-10, boundedness_ratio: 10.0 })
    }

    /// Grid of `n_nodes` symmetric about `center` with the given
    /// half-width; pick half_width >= 8 marginal standard deviations.
    pub fn centered(center: f64, half_width: f64, n_nodes: usize) -> Result<Self> {
        Self::new(EvaluationGrid::new(center - half_width, center + half_width, n_nodes)?)
    }

    pub fn with_ratio(mut self, tau: f64) -> Self {
        self.boundedness_ratio = tau;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.spectral_floor = floor;
        self
    }
}

/// Spectral deconvolution test: sample m on the grid, Fourier transform,
/// multiply by the inverse of the unit-Gaussian kernel transform
/// exp(omega^2 / 2) (the N(0,1) kernel is the heat kernel at t = 1/2 in
/// the u_t = u_xx scaling), and check boundedness of the result over the
/// frequencies that sit above the spectral floor.
pub fn heat_extension_check(
    model: &LogMarginalModel,
    config: &HeatTestConfig,
) -> Result<DiagnosticReport> {
    let grid = &config.grid;
    let n = grid.n_nodes();
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "spectral grid needs a power-of-two node count >= 256, got {n}"
        )));
    }
    let h = grid.spacing();
    let nyquist = std::f64::consts::PI / h;
    if nyquist < 4.0 {
        return Err(Error::InvalidGrid(format!(
            "grid too coarse: Nyquist frequency {nyquist:.3} < 4"
        )));
    }

    // Sample the density.
    let mut density = Vec::with_capacity(n);
    for j in 0..n {
        density.push(model.eval(grid.node(j), 0)?.exp());
    }
    let mass = crate::numerics::trapezoid(&density, h);
    if (mass - 1.0).abs() > 1e-6 {
        return Ok(DiagnosticReport {
            verdict: Verdict::Inconclusive,
            test_statistic: f64::NAN,
            threshold: config.boundedness_ratio,
            violations: vec![],
            notes: format!(
                "density mass on the grid is {mass:.8}; the grid does not effectively contain the density"
            ),
        });
    }

    // DFT; |spectrum[k]| approximates |FT of m| at omega_k = 2 pi k/(n h)
    // up to the h factor, which cancels in the ratios below.
    let mut buf: Vec<Complex<f64>> = density.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amp0 = buf[0].norm();

    let floor = config.spectral_floor * amp0;
    let half = n / 2;
    let omega = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * h);

    let mut max_admissible_omega = 0.0f64;
    let mut best_log_ratio = f64::NEG_INFINITY;
    let mut log_ratios: Vec<Option<f64>> = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let amp = buf[k].norm();
        if amp >= floor {
            let w = omega(k);
            max_admissible_omega = max_admissible_omega.max(w);
            let lr = (amp / amp0).ln() + 0.5 * w * w;
            best_log_ratio = best_log_ratio.max(lr);
            log_ratios.push(Some(lr));
        } else {
            log_ratios.push(None);
        }
    }

    if max_admissible_omega < 2.0 {
        return Ok(DiagnosticReport {
            verdict: Verdict::Inconclusive,
            test_statistic: f64::NAN,
            threshold: config.boundedness_ratio,
            violations: vec![],
            notes: format!(
                "spectral floor truncates at |omega| = {max_admissible_omega:.3} < 2: insufficient resolution"
            ),
        });
    }

    let statistic = best_log_ratio.min(700.0).exp();
    let tau = config.boundedness_ratio;
    let mut notes = format!(
        "admissible band |omega| <= {max_admissible_omega:.3} (spectral floor {:.1e} relative beyond)",
        config.spectral_floor
    );
    if model.source() == ModelSource::Kde {
        notes.push_str(
            "; KDE-backed input: sampling noise inflates high-frequency content, verdict is inconclusive-prone",
        );
    }

    if statistic <= tau {
        // Flat deconvolved spectrum out to the floor indicates the
        // degenerate (point-mass) boundary case.
        let edge_ratio = log_ratios
            .iter()
            .rev()
            .flatten()
            .next()
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        if statistic >= 0.5 && edge_ratio.exp() >= 0.5 {
            notes.push_str("; boundary case: deconvolved spectrum is flat (point-mass prior)");
        }
        return Ok(DiagnosticReport {
            verdict: Verdict::Realizable,
            test_statistic: statistic,
            threshold: tau,
            violations: vec![],
            notes,
        });
    }

    // Contiguous violating frequency bands.
    let log_tau = tau.ln();
    let mut violations = Vec::new();
    let mut run: Option<(f64, f64, f64)> = None;
    for (k, lr) in log_ratios.iter().enumerate() {
        let over = matches!(lr, Some(v) if *v > log_tau);
        if over {
            let w = omega(k);
            let v = lr.unwrap();
            run = Some(match run {
                Some((lo, _, worst)) => (lo, w, worst.max(v)),
                None => (w, w, v),
            });
        } else if let Some((lo, hi, worst)) = run.take() {
            violations.push(Violation { lo, hi, value: worst.min(700.0).exp() });
        }
    }
    if let Some((lo, hi, worst)) = run {
        violations.push(Violation { lo, hi, value: worst.min(700.0).exp() });
    }
    Ok(DiagnosticReport {
        verdict: Verdict::NotRealizable,
        test_statistic: statistic,
        threshold: tau,
        violations,
        notes,
    })
}
