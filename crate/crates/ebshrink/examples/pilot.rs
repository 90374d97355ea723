//! Scratch pilot runs for test-constant calibration. Not part of the
//! deliverable surface; invoked manually during development.

use ebshrink::fit::{bin_observations, fit_lindsey, fit_npmle_em_traced, npmle_support_grid};
use ebshrink::numerics::gauss_legendre;
use ebshrink::oracle::{oracle_posterior_mean, oracle_posterior_var};
use ebshrink::prior::{make_prior, PriorSpec};
use ebshrink::rules::{james_stein, james_stein_equivalent_model, sure_estimate};
use ebshrink::simulate::sample_compound;
use ebshrink::{Family, LogMarginalModel, ObservationSet};

fn main() {
    npmle_quality();
    js_sure();
    lindsey_quartic();
}

fn npmle_quality() {
    let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
    // Oracle Bayes risk: E[Var(mu | Y)] by quadrature over the marginal.
    let risk = gauss_legendre(
        |y| {
            let var = oracle_posterior_var(&prior, y, 1.0);
            let m = LogMarginalModel::from_mixture(prior.clone(), 1.0)
                .unwrap()
                .eval(y, 0)
                .unwrap()
                .exp();
            var * m
        },
        -10.0,
        10.0,
        256,
    );
    println!("two-point oracle Bayes risk = {risk:.6}");

    for seed in [1u64, 2, 3, 4, 5, 6] {
        let t0 = std::time::Instant::now();
        let (truth, obs) =
            sample_compound(&prior, 2000, seed, Family::GaussianLocation, 1.0).unwrap();
        let grid = npmle_support_grid(&obs).unwrap();
        let (fit, report, trace) = fit_npmle_em_traced(&obs, &grid, 1e-8, 2000).unwrap();
        let mse: f64 = obs
            .values()
            .iter()
            .zip(&truth)
            .map(|(&y, &mu)| {
                let d = oracle_posterior_mean(&fit, y, 1.0) - mu;
                d * d
            })
            .sum::<f64>()
            / truth.len() as f64;
        let oracle_mse: f64 = obs
            .values()
            .iter()
            .zip(&truth)
            .map(|(&y, &mu)| {
                let d = oracle_posterior_mean(&prior, y, 1.0) - mu;
                d * d
            })
            .sum::<f64>()
            / truth.len() as f64;
        let monotone = trace.windows(2).all(|w| w[1] >= w[0]);
        println!(
            "npmle seed={seed} iters={} mse={mse:.5} ratio_vs_risk={:.4} ratio_vs_oracle_emp={:.4} monotone={monotone} time={:.2?}",
            report.iterations,
            mse / risk,
            mse / oracle_mse,
            t0.elapsed()
        );
    }
}

fn js_sure() {
    // Fixed true means drawn once; then 200 paired replications.
    let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
    let (mu, _) = sample_compound(&prior, 500, 0, Family::GaussianLocation, 1.0).unwrap();
    let mut diffs = Vec::new();
    for seed in 1..=200u64 {
        let (noise, _) = sample_compound(
            &make_prior(&PriorSpec::Point { u: 0.0 }).unwrap(),
            500,
            seed,
            Family::GaussianLocation,
            1.0,
        )
        .unwrap();
        // noise means are all 0; reuse the obs draw instead:
        let _ = noise;
        let (_, z) = sample_compound(
            &make_prior(&PriorSpec::Point { u: 0.0 }).unwrap(),
            500,
            seed,
            Family::GaussianLocation,
            1.0,
        )
        .unwrap();
        let values: Vec<f64> = mu.iter().zip(z.values()).map(|(m, e)| m + e).collect();
        let obs = ObservationSet::gaussian(values).unwrap();
        let est = james_stein(&obs).unwrap();
        let loss: f64 = est
            .estimates
            .iter()
            .zip(&mu)
            .map(|(d, m)| (d - m) * (d - m))
            .sum::<f64>()
            / mu.len() as f64;
        let model = james_stein_equivalent_model(&obs).unwrap();
        let sure = sure_estimate(&model, &obs).unwrap().value;
        diffs.push(sure - loss);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
        / (diffs.len() - 1) as f64)
        .sqrt();
    let se = sd / (diffs.len() as f64).sqrt();
    println!("js sure: mean diff {mean:.6}, se {se:.6}, |mean|/se = {:.3}", mean.abs() / se);
}

fn lindsey_quartic() {
    let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
    let (_, obs) = sample_compound(&prior, 20_000, 13, Family::GaussianLocation, 1.0).unwrap();
    let binning = bin_observations(&obs, 60).unwrap();
    let (model, report) = fit_lindsey(&binning, 4).unwrap();
    let beta = model.polynomial_coefficients().unwrap();
    println!("lindsey K=4 converged={} beta={beta:?}", report.converged);
    // Where does 1 + l'' go negative inside the domain?
    if let ebshrink::Domain::Interval { lo, hi } = model.domain() {
        let mut first_bad = f64::NAN;
        let mut center_min = f64::INFINITY;
        for j in 0..=400 {
            let y = lo + (hi - lo) * j as f64 / 400.0;
            let pv = 1.0 + model.eval(y, 2).unwrap();
            if y.abs() <= 1.0 {
                center_min = center_min.min(pv);
            }
            if pv < -1e-6 && first_bad.is_nan() {
                first_bad = y;
            }
        }
        println!(
            "domain [{lo:.3}, {hi:.3}]: first violation at {first_bad:.3}, min over [-1,1] = {center_min:.4}"
        );
    }
}
