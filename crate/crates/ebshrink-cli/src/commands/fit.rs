use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ebshrink::fit::{
    bin_observations, fit_kde, fit_lindsey, fit_npmle_em, fit_scorematch, tune_rho_by_sure,
    FitReport, ScoreMatchConfig,
};
use ebshrink::io::model_to_json;
use ebshrink::{EvaluationGrid, LogMarginalModel, ObservationSet};

use crate::config;
use crate::errors::{CliError, CliResult};
use crate::svg::{line_chart, Series};
use crate::util::{load_observations, with_ext, write_file};

#[derive(Args)]
pub struct FitArgs {
    /// Estimator: kde | lindsey | npmle | scorematch.
    #[arg(long)]
    pub method: Option<String>,
    /// Observations CSV (sidecar JSON read from the same stem).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output model JSON; the fit report goes to <stem>.report.json.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional SVG plot of the fitted density and its shrinkage rule.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// KDE bandwidth (Silverman when omitted).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Histogram bins for lindsey.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Polynomial degree for lindsey.
    #[arg(long)]
    pub degree: Option<usize>,
    /// NPMLE support atoms.
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Convergence tolerance (npmle log-likelihood gain).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap (npmle).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Score-matching penalty weight.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Pick rho by SURE over a log-spaced grid before fitting.
    #[arg(long, default_value_t = false)]
    pub tune_rho: bool,
    /// Enforce the convexity constraint (scorematch).
    #[arg(long, default_value_t = false)]
    pub convexity: bool,
    /// Evaluation grid nodes (scorematch).
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// KKT residual tolerance (scorematch).
    #[arg(long)]
    pub kkt_tol: Option<f64>,
    /// Fail (exit 5) on non-convergence instead of reporting it.
    #[arg(long, default_value_t = false)]
    pub strict: bool,
    /// JSON config file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    method: Option<String>,
    bandwidth: Option<f64>,
    bins: Option<usize>,
    degree: Option<usize>,
    atoms: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    rho: Option<f64>,
    tune_rho: Option<bool>,
    convexity: Option<bool>,
    grid_nodes: Option<usize>,
    kkt_tol: Option<f64>,
}

#[derive(Serialize)]
struct Effective {
    command: &'static str,
    method: String,
    bandwidth: Option<f64>,
    bins: usize,
    degree: usize,
    atoms: usize,
    tol: f64,
    max_iter: usize,
    rho: f64,
    tune_rho: bool,
    convexity: bool,
    grid_nodes: usize,
    kkt_tol: f64,
    strict: bool,
}

#[derive(Serialize)]
struct ReportJson {
    method: String,
    report: FitReport,
    effective_config: Value,
}

pub fn run(args: FitArgs) -> CliResult<()> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let method = config::pick(args.method, file.method, "kde".into());
    let effective = Effective {
        command: "fit",
        method: method.clone(),
        bandwidth: args.bandwidth.or(file.bandwidth),
        bins: config::pick(args.bins, file.bins, 60),
        degree: config::pick(args.degree, file.degree, 5),
        atoms: config::pick(args.atoms, file.atoms, 300),
        tol: config::pick(args.tol, file.tol, 1e-8),
        max_iter: config::pick(args.max_iter, file.max_iter, 2000),
        rho: config::pick(args.rho, file.rho, 1e-2),
        tune_rho: args.tune_rho || file.tune_rho.unwrap_or(false),
        convexity: args.convexity || file.convexity.unwrap_or(false),
        grid_nodes: config::pick(args.grid_nodes, file.grid_nodes, 401),
        kkt_tol: config::pick(args.kkt_tol, file.kkt_tol, 1e-6),
        strict: args.strict,
    };

    let obs = load_observations(&args.input)?;
    let (model, report) = fit_model(&method, &obs, &effective)?;

    if args.strict && !report.converged {
        return Err(CliError::NonConverged(format!(
            "{} fit did not converge after {} iterations",
            method, report.iterations
        )));
    }

    write_file(&args.output, &format!("{}\n", model_to_json(&model)))?;
    let report_json = ReportJson {
        method: method.clone(),
        report,
        effective_config: config::echo(&effective),
    };
    write_file(
        &with_ext(&args.output, "report.json"),
        &format!("{}\n", serde_json::to_string_pretty(&report_json)?),
    )?;

    if let Some(plot_path) = args.plot {
        write_file(&plot_path, &render_plot(&model, &obs)?)?;
    }
    Ok(())
}

fn fit_model(
    method: &str,
    obs: &ObservationSet,
    cfg: &Effective,
) -> CliResult<(LogMarginalModel, FitReport)> {
    match method {
        "kde" => {
            let model = fit_kde(obs, cfg.bandwidth)?;
            let report = FitReport {
                iterations: 0,
                final_objective: f64::NAN,
                converged: true,
                constraint_violation: 0.0,
            };
            Ok((model, report))
        }
        "lindsey" => {
            let binning = bin_observations(obs, cfg.bins)?;
            Ok(fit_lindsey(&binning, cfg.degree)?)
        }
        "npmle" => {
            let grid = EvaluationGrid::new(obs.min(), obs.max(), cfg.atoms)?;
            let (prior, report) = fit_npmle_em(obs, &grid, cfg.tol, cfg.max_iter)?;
            let model = LogMarginalModel::from_mixture(prior, obs.noise_sd())?
                .with_source(ebshrink::ModelSource::Npmle);
            Ok((model, report))
        }
        "scorematch" => {
            let grid = EvaluationGrid::new(
                obs.min() - 4.0 * obs.noise_sd(),
                obs.max() + 4.0 * obs.noise_sd(),
                cfg.grid_nodes,
            )?;
            let mut sm = ScoreMatchConfig::new(grid)
                .with_rho(cfg.rho)
                .with_convexity(cfg.convexity);
            sm.kkt_tol = cfg.kkt_tol;
            if cfg.tune_rho {
                let (best, _) = tune_rho_by_sure(obs, &sm, None)?;
                sm.rho = best;
            }
            Ok(fit_scorematch(obs, &sm)?)
        }
        other => Err(CliError::invalid(format!(
            "unknown method '{other}' (expected kde | lindsey | npmle | scorematch)"
        ))),
    }
}

/// Plot the fitted density m(y) and the plug-in rule delta(y) = y + l'(y)
/// over the default grid.
fn render_plot(model: &LogMarginalModel, obs: &ObservationSet) -> CliResult<String> {
    let grid = EvaluationGrid::default_for(obs)?;
    let mut density = Vec::new();
    let mut rule = Vec::new();
    for y in grid.nodes() {
        if let Ok(l) = model.eval(y, 0) {
            density.push((y, l.exp()));
        }
        if let Ok(s) = model.eval(y, 1) {
            rule.push((y, y + obs.noise_sd() * obs.noise_sd() * s));
        }
    }
    Ok(line_chart(
        "fitted marginal and shrinkage rule",
        &[
            Series { name: "m(y)".into(), points: density },
            Series { name: "delta(y)".into(), points: rule },
        ],
    ))
}
