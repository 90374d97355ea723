//! Shrinkage decision rules: the posterior-mean plug-in delta(y) = y + l'(y),
//! James-Stein, the exact mixture rule, Robbins' count rule, general
//! exponential-family posterior moments, scale-model posterior moments,
//! and the unbiased risk estimate that scores them all.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Family, ObservationSet};
use crate::error::{Error, Result};
use crate::model::{Domain, LogMarginalModel};
use crate::numerics::{adaptive_simpson, pava_nondecreasing};
use crate::oracle::oracle_posterior_mean;
use crate::prior::MixingMeasure;

/// Per-observation decisions plus rule metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageEstimates {
    pub inputs: Vec<f64>,
    pub estimates: Vec<f64>,
    pub rule_name: String,
    pub model_provenance: String,
}

impl ShrinkageEstimates {
    fn new(
        inputs: Vec<f64>,
        estimates: Vec<f64>,
        rule_name: impl Into<String>,
        model_provenance: impl Into<String>,
    ) -> Result<Self> {
        if inputs.len() != estimates.len() {
            return Err(Error::InvalidInput("estimate/input length mismatch".into()));
        }
        if estimates.iter().any(|e| !e.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "shrinkage estimates".into(),
                detail: "non-finite estimate".into(),
            });
        }
        Ok(Self {
            inputs,
            estimates,
            rule_name: rule_name.into(),
            model_provenance: model_provenance.into(),
        })
    }

    /// Mean squared error against a vector of true means.
    pub fn mse_against(&self, truth: &[f64]) -> f64 {
        assert_eq!(truth.len(), self.estimates.len());
        self.estimates
            .iter()
            .zip(truth)
            .map(|(d, t)| (d - t) * (d - t))
            .sum::<f64>()
            / truth.len() as f64
    }
}

/// The Bayes-correction plug-in: delta(y) = y + sd^2 l'(y).
///
/// At unit noise this is exactly y + l'(y); for other noise scales the
/// sd^2 factor is what "standardize, shrink, rescale" works out to on the
/// raw scale.
pub fn tweedie_rule(model: &LogMarginalModel, obs: &ObservationSet) -> Result<ShrinkageEstimates> {
    let var = obs.noise_sd() * obs.noise_sd();
    let mut estimates = Vec::with_capacity(obs.len());
    for &y in obs.values() {
        estimates.push(y + var * model.eval(y, 1)?);
    }
    ShrinkageEstimates::new(
        obs.values().to_vec(),
        estimates,
        "tweedie",
        model.source().to_string(),
    )
}

/// The classical positive-part-free James-Stein estimator:
/// (1 - (n-2)/sum y^2) y, elementwise.
pub fn james_stein(obs: &ObservationSet) -> Result<ShrinkageEstimates> {
    let n = obs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "James-Stein needs n >= 3, got {n}"
        )));
    }
    let sum_sq: f64 = obs.values().iter().map(|y| y * y).sum();
    if sum_sq == 0.0 {
        return Err(Error::DegenerateData("sum of squares is zero".into()));
    }
    let factor = 1.0 - (n as f64 - 2.0) / sum_sq;
    let estimates = obs.values().iter().map(|y| factor * y).collect();
    ShrinkageEstimates::new(obs.values().to_vec(), estimates, "james-stein", "none")
}

/// The quadratic log-marginal whose plug-in rule reproduces James-Stein
/// exactly: beta_2 = -(n-2) / (2 sum y^2).
pub fn james_stein_equivalent_model(obs: &ObservationSet) -> Result<LogMarginalModel> {
    let n = obs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "James-Stein needs n >= 3, got {n}"
        )));
    }
    let sum_sq: f64 = obs.values().iter().map(|y| y * y).sum();
    if sum_sq == 0.0 {
        return Err(Error::DegenerateData("sum of squares is zero".into()));
    }
    let beta2 = -(n as f64 - 2.0) / (2.0 * sum_sq);
    LogMarginalModel::polynomial(vec![0.0, 0.0, beta2], Domain::Real)
}

/// The exact discrete-mixture posterior mean at every observation; no
/// differentiation involved.
pub fn posterior_mean_from_mixture(
    prior: &MixingMeasure,
    obs: &ObservationSet,
    noise_sd: f64,
) -> Result<ShrinkageEstimates> {
    if noise_sd <= 0.0 {
        return Err(Error::InvalidInput(format!("noise_sd {noise_sd} must be positive")));
    }
    let estimates = obs
        .values()
        .iter()
        .map(|&y| oracle_posterior_mean(prior, y, noise_sd))
        .collect();
    ShrinkageEstimates::new(
        obs.values().to_vec(),
        estimates,
        "mixture-posterior",
        format!("prior: {}", prior.label()),
    )
}

/// Robbins count-rule estimates for each k = 0..pmf.len()-1 from a pmf
/// table: (k+1) p(k+1) / p(k), with 0 where p(k+1) (or p(k)) vanishes.
/// With `smoothed`, pool-adjacent-violators (weighted by p) makes the
/// sequence nondecreasing over the ks with positive mass.
pub fn robbins_estimates_from_pmf(pmf: &[f64], smoothed: bool) -> Vec<f64> {
    let kmax = pmf.len();
    let raw: Vec<f64> = (0..kmax)
        .map(|k| {
            let succ = if k + 1 < kmax { pmf[k + 1] } else { 0.0 };
            if pmf[k] > 0.0 {
                (k as f64 + 1.0) * succ / pmf[k]
            } else {
                0.0
            }
        })
        .collect();
    if !smoothed {
        return raw;
    }
    // Isotonic repair over the observed support only.
    let observed: Vec<usize> = (0..kmax).filter(|&k| pmf[k] > 0.0).collect();
    let ys: Vec<f64> = observed.iter().map(|&k| raw[k]).collect();
    let ws: Vec<f64> = observed.iter().map(|&k| pmf[k]).collect();
    let fixed = pava_nondecreasing(&ys, &ws);
    let mut out = raw;
    for (pos, &k) in observed.iter().enumerate() {
        out[k] = fixed[pos];
    }
    out
}

/// Robbins' count prediction rule E(lambda | y) = (y+1) m(y+1) / m(y)
/// with the empirical frequencies standing in for m, optionally repaired
/// to a monotone rule by isotonic regression.
pub fn robbins_poisson_rule(counts: &ObservationSet, smoothed: bool) -> Result<ShrinkageEstimates> {
    if counts.family() != Family::PoissonCount {
        return Err(Error::UnsupportedFamily(format!(
            "Robbins' rule needs poisson-count data, got {}",
            counts.family()
        )));
    }
    let n = counts.len() as f64;
    let kmax = counts.max() as usize;
    let mut pmf = vec![0.0f64; kmax + 2];
    for &y in counts.values() {
        pmf[y as usize] += 1.0 / n;
    }
    let table = robbins_estimates_from_pmf(&pmf, smoothed);
    let zero_successors: Vec<usize> = (0..=kmax)
        .filter(|&k| pmf[k] > 0.0 && pmf[k + 1] == 0.0)
        .collect();
    let estimates: Vec<f64> = counts.values().iter().map(|&y| table[y as usize]).collect();
    let rule_name = if smoothed { "robbins+isotonic" } else { "robbins" };
    let provenance = if zero_successors.is_empty() {
        format!("empirical pmf over k=0..{kmax}")
    } else {
        format!(
            "empirical pmf over k=0..{kmax}; zero-frequency successor at k in {zero_successors:?}"
        )
    };
    ShrinkageEstimates::new(counts.values().to_vec(), estimates, rule_name, provenance)
}

/// Twice-differentiable log carrier density for the exponential-family
/// posterior-moment formulas.
pub trait LogCarrier {
    fn log_density(&self, y: f64) -> f64;
    fn dlog_density(&self, y: f64) -> f64;
    fn d2log_density(&self, y: f64) -> f64;
}

/// The N(0,1) carrier: log m0 = -y^2/2 + const.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianCarrier;

impl LogCarrier for GaussianCarrier {
    fn log_density(&self, y: f64) -> f64 {
        crate::numerics::norm_logpdf(y)
    }
    fn dlog_density(&self, y: f64) -> f64 {
        -y
    }
    fn d2log_density(&self, _y: f64) -> f64 {
        -1.0
    }
}

/// Posterior mean and variance of the canonical parameter under an
/// exponential-family model with the given carrier: differentiating the
/// posterior cumulant generating function log(m(y)/m0(y)) gives
/// mean = l'(y) - (log m0)'(y) and var = l''(y) - (log m0)''(y).
pub fn expfam_posterior_moments(
    model: &LogMarginalModel,
    carrier: &dyn LogCarrier,
    y: f64,
) -> Result<(f64, f64)> {
    let mean = model.eval(y, 1)? - carrier.dlog_density(y);
    let var = model.eval(y, 2)? - carrier.d2log_density(y);
    Ok((mean, var))
}

/// Gamma prior on the noise precision lambda = sigma^{-2}, with a
/// symmetric, twice-differentiable base density p for the standardized
/// observation. Differentiability of the integrated density p_y is
/// assumed, not checked.
#[derive(Clone)]
pub struct WestPrior {
    pub alpha: f64,
    pub beta: f64,
    log_base: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for WestPrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WestPrior")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

impl WestPrior {
    pub fn new(
        alpha: f64,
        beta: f64,
        log_base: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha {alpha} and beta {beta} must be positive"
            )));
        }
        Ok(Self { alpha, beta, log_base: Arc::new(log_base) })
    }

    /// Standard-normal base density.
    pub fn with_normal_base(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, crate::numerics::norm_logpdf)
    }

    /// log of the integrand of p_y at lambda = e^t (in log-lambda
    /// coordinates, Jacobian included):
    ///   (alpha+1)/2 t - (beta/2) e^t + log p(e^{t/2} y) + const.
    fn log_integrand(&self, y: f64, t: f64) -> f64 {
        let lam = t.exp();
        0.5 * (self.alpha + 1.0) * t - 0.5 * self.beta * lam
            + (self.log_base)(lam.sqrt() * y)
    }

    /// log p_y(y) up to a y-independent constant, by adaptive quadrature
    /// in log-lambda coordinates.
    fn log_py(&self, y: f64) -> Result<f64> {
        // Coarse scan for the peak, then integrate the shifted integrand
        // over the window where it is alive.
        let (t_lo, t_hi, n_scan) = (-60.0, 25.0, 512);
        let step = (t_hi - t_lo) / n_scan as f64;
        let mut best_t = t_lo;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n_scan {
            let t = t_lo + i as f64 * step;
            let v = self.log_integrand(y, t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        if !best.is_finite() {
            return Err(Error::NumericalFailure {
                context: "scale-mixture quadrature".into(),
                detail: format!("integrand vanished everywhere for y = {y}"),
            });
        }
        let alive = |t: f64| self.log_integrand(y, t) - best > -90.0;
        let mut lo = best_t;
        while lo > t_lo && alive(lo - step) {
            lo -= step;
        }
        let mut hi = best_t;
        while hi < t_hi && alive(hi + step) {
            hi += step;
        }
        lo -= step;
        hi += step;
        let f = |t: f64| (self.log_integrand(y, t) - best).exp();
        let integral = adaptive_simpson(&f, lo, hi, 1e-12, 48).ok_or_else(|| {
            Error::NumericalFailure {
                context: "scale-mixture quadrature".into(),
                detail: format!("adaptive quadrature failed to converge at y = {y}"),
            }
        })?;
        Ok(best + integral.ln())
    }
}

/// Posterior precision moments plus the derivative terms they were
/// assembled from; serializes as a self-contained JSON record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WestMoments {
    pub y: f64,
    pub alpha: f64,
    pub beta: f64,
    /// g_y(y) = -(log p_y)'(y)
    pub score: f64,
    /// G_y(y) = g_y'(y)
    pub score_derivative: f64,
    pub mean: f64,
    pub var: f64,
}

/// Posterior mean and variance of the precision lambda given y:
///   E[lambda | y]   = (1/beta)   { (alpha+1) - y g_y(y) }
///   Var(lambda | y) = (1/beta^2) { 2(alpha+1) - 3 y g_y(y) - y^2 G_y(y) }
/// with g_y = -(log p_y)' and G_y = g_y' taken by central differences at
/// step 1e-4 (1 + |y|).
pub fn west_precision_moments(prior: &WestPrior, y: f64) -> Result<WestMoments> {
    if !y.is_finite() {
        return Err(Error::InvalidInput(format!("y must be finite, got {y}")));
    }
    let h = 1e-4 * (1.0 + y.abs());
    let l_m2 = prior.log_py(y - 2.0 * h)?;
    let l_m1 = prior.log_py(y - h)?;
    let l_0 = prior.log_py(y)?;
    let l_p1 = prior.log_py(y + h)?;
    let l_p2 = prior.log_py(y + 2.0 * h)?;
    let g_mid = -(l_p1 - l_m1) / (2.0 * h);
    let g_left = -(l_0 - l_m2) / (2.0 * h);
    let g_right = -(l_p2 - l_0) / (2.0 * h);
    let g_deriv = (g_right - g_left) / (2.0 * h);

    let a1 = prior.alpha + 1.0;
    let mean = (a1 - y * g_mid) / prior.beta;
    let var = (2.0 * a1 - 3.0 * y * g_mid - y * y * g_deriv) / (prior.beta * prior.beta);
    if var < -1e-6 {
        return Err(Error::NumericalFailure {
            context: "scale posterior variance".into(),
            detail: format!("negative variance {var} at y = {y}"),
        });
    }
    Ok(WestMoments {
        y,
        alpha: prior.alpha,
        beta: prior.beta,
        score: g_mid,
        score_derivative: g_deriv,
        mean,
        var: var.max(0.0),
    })
}

/// Stein's unbiased risk estimate for the rule y -> y + l'(y), reported
/// on the standardized (unit-noise) scale:
///   SURE = 1 + (1/n) sum_i [ s(y_i)^2 + 2 s'(y_i) ]
/// where s and s' are evaluated through the model. For noise_sd != 1 the
/// observations are standardized first, which multiplies l' by sd and
/// l'' by sd^2; the reported value estimates the risk of estimating
/// mu / sd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SureValue {
    pub value: f64,
    /// Mean of s^2 over the observations.
    pub score_term: f64,
    /// Mean of 2 s' over the observations.
    pub divergence_term: f64,
}

pub fn sure_estimate(model: &LogMarginalModel, obs: &ObservationSet) -> Result<SureValue> {
    let sd = obs.noise_sd();
    let n = obs.len() as f64;
    let mut score_term = 0.0;
    let mut divergence_term = 0.0;
    for &y in obs.values() {
        let s = sd * model.eval(y, 1)?;
        let sp = sd * sd * model.eval(y, 2)?;
        score_term += s * s / n;
        divergence_term += 2.0 * sp / n;
    }
    Ok(SureValue {
        value: 1.0 + score_term + divergence_term,
        score_term,
        divergence_term,
    })
}
