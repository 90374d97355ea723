//! Shared numerical kernels: log-sum-exp, standard-normal functions,
//! quadrature, cubic-spline interpolation, and isotonic regression.

use statrs::distribution::{ContinuousCDF, Normal};

pub const LN_SQRT_2PI: f64 = 0.9189385332046727417803297364056176;

/// log(Σ exp(x_i)) computed stably. Returns -inf for an empty slice or
/// all-(-inf) input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Standard-normal log density.
pub fn norm_logpdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard-normal density.
pub fn norm_pdf(z: f64) -> f64 {
    norm_logpdf(z).exp()
}

/// Standard-normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Standard-normal quantile function.
pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * values[0] + interior + 0.5 * values[n - 1])
}

const GL5_NODES: [f64; 5] = [
    -0.9061798459386640,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.9061798459386640,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.2369268850561891,
    0.4786286704993665,
    0.5688888888888889,
    0.4786286704993665,
    0.2369268850561891,
];

/// Composite 5-point Gauss-Legendre quadrature of `f` over `[lo, hi]`
/// split into `panels` equal panels. Error decays like panel_width^10 for
/// smooth integrands, so modest panel counts already beat the 1e-6
/// normalization budget by a wide margin.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let w = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * w;
        let c = a + 0.5 * w;
        let half = 0.5 * w;
        for (t, gw) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            total += gw * half * f(c + half * t);
        }
    }
    total
}

/// Adaptive Simpson quadrature with absolute+relative tolerance.
/// Returns `None` if the recursion depth budget is exhausted before the
/// tolerance is met anywhere.
pub fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_depth: u32,
) -> Option<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Some(l + r)
    }
    let fa = f(lo);
    let fb = f(hi);
    let m = 0.5 * (lo + hi);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, hi - lo);
    let scale = whole.abs().max(1e-300);
    recurse(f, lo, hi, fa, fm, fb, whole, tol * scale.max(1.0), max_depth)
}

/// Natural cubic spline over equally spaced nodes. C^2: value, first and
/// second derivatives are all evaluatable; the second derivative is
/// continuous across knots (piecewise linear in between).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 3, "spline needs at least 3 nodes");
        assert!(h > 0.0);
        // Natural boundary: second derivative pinned to 0 at both ends.
        // Tridiagonal system M_{j-1} + 4 M_j + M_{j+1} = 6 d2_j for the
        // interior second derivatives (Thomas algorithm).
        let m = n - 2;
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            rhs[j] = 6.0 * (values[j] - 2.0 * values[j + 1] + values[j + 2]) / (h * h);
        }
        let mut diag = vec![4.0; m];
        for j in 1..m {
            let w = 1.0 / diag[j - 1];
            diag[j] -= w;
            rhs[j] -= w * rhs[j - 1];
        }
        let mut second = vec![0.0; n];
        if m > 0 {
            second[m] = rhs[m - 1] / diag[m - 1];
            for j in (1..m).rev() {
                second[j] = (rhs[j - 1] - second[j + 1]) / diag[j - 1];
            }
        }
        Self { x0, h, values, second }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        let t = (x - self.x0) / self.h;
        let j = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        (j, x - (self.x0 + j as f64 * self.h))
    }

    pub fn value(&self, x: f64) -> f64 {
        let (j, dx) = self.locate(x);
        let h = self.h;
        let a = h - dx;
        let (ya, yb) = (self.values[j], self.values[j + 1]);
        let (ma, mb) = (self.second[j], self.second[j + 1]);
        ma * a * a * a / (6.0 * h)
            + mb * dx * dx * dx / (6.0 * h)
            + (ya / h - ma * h / 6.0) * a
            + (yb / h - mb * h / 6.0) * dx
    }

    pub fn deriv1(&self, x: f64) -> f64 {
        let (j, dx) = self.locate(x);
        let h = self.h;
        let a = h - dx;
        let (ya, yb) = (self.values[j], self.values[j + 1]);
        let (ma, mb) = (self.second[j], self.second[j + 1]);
        -ma * a * a / (2.0 * h) + mb * dx * dx / (2.0 * h) + (yb - ya) / h
            - (mb - ma) * h / 6.0
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let (j, dx) = self.locate(x);
        let h = self.h;
        (self.second[j] * (h - dx) + self.second[j + 1] * dx) / h
    }
}

/// Weighted pool-adjacent-violators: returns the nondecreasing sequence
/// minimizing Σ w_i (out_i - y_i)^2.
pub fn pava_nondecreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    let n = y.len();
    let mut means: Vec<f64> = Vec::with_capacity(n);
    let mut weights: Vec<f64> = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        means.push(y[i]);
        weights.push(w[i]);
        sizes.push(1);
        while means.len() > 1 {
            let k = means.len();
            if means[k - 2] <= means[k - 1] {
                break;
            }
            let wt = weights[k - 2] + weights[k - 1];
            let merged = if wt > 0.0 {
                (weights[k - 2] * means[k - 2] + weights[k - 1] * means[k - 1]) / wt
            } else {
                0.5 * (means[k - 2] + means[k - 1])
            };
            means[k - 2] = merged;
            weights[k - 2] = wt;
            sizes[k - 2] += sizes[k - 1];
            means.pop();
            weights.pop();
            sizes.pop();
        }
    }
    let mut out = Vec::with_capacity(n);
    for (m, s) in means.iter().zip(sizes.iter()) {
        out.extend(std::iter::repeat(*m).take(*s));
    }
    out
}
