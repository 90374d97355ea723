use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ebshrink::diag::{
    convexity_check, heat_extension_check, polynomial_realizability,
    posterior_variance_positivity, DiagnosticReport, HeatTestConfig, Verdict,
};
use ebshrink::io::model_from_json;
use ebshrink::{Domain, EvaluationGrid, LogMarginalModel, Representation};

use crate::config;
use crate::errors::{CliError, CliResult};
use crate::util::{read_file, write_file};

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Check: convexity | polylog | posvar | heat | all.
    #[arg(long)]
    pub check: Option<String>,
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Output report JSON.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Profile grid bounds and node count (convexity / posvar).
    #[arg(long)]
    pub grid_lo: Option<f64>,
    #[arg(long)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// Spectral grid node count (power of two).
    #[arg(long)]
    pub heat_nodes: Option<usize>,
    /// Spectral grid half width.
    #[arg(long)]
    pub heat_half_width: Option<f64>,
    /// Boundedness threshold tau.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Relative spectral floor.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Optional SVG plot of the c(y) and 1 + l'' profiles.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Exit 4 when any verdict is not-realizable.
    #[arg(long, default_value_t = false)]
    pub strict: bool,
    /// JSON config file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    check: Option<String>,
    grid_lo: Option<f64>,
    grid_hi: Option<f64>,
    grid_nodes: Option<usize>,
    heat_nodes: Option<usize>,
    heat_half_width: Option<f64>,
    tau: Option<f64>,
    floor: Option<f64>,
}

#[derive(Serialize)]
struct Effective {
    command: &'static str,
    check: String,
    grid_lo: f64,
    grid_hi: f64,
    grid_nodes: usize,
    heat_nodes: usize,
    heat_half_width: f64,
    tau: f64,
    floor: f64,
    strict: bool,
}

#[derive(Serialize)]
struct SingleOutput {
    check: String,
    report: DiagnosticReport,
    effective_config: Value,
}

#[derive(Serialize)]
struct AllOutput {
    convexity: DiagnosticReport,
    polylog: DiagnosticReport,
    posvar: DiagnosticReport,
    heat: DiagnosticReport,
    effective_config: Value,
}

/// A rough center/scale for default grid construction.
fn model_center_scale(model: &LogMarginalModel) -> (f64, f64) {
    match model.representation() {
        Representation::Mixture { prior, noise_sd } => {
            let var = prior.variance() + noise_sd * noise_sd;
            (prior.mean(), var.sqrt().max(1.0))
        }
        Representation::Polynomial { coefficients } => {
            if coefficients.len() >= 3 && coefficients[2] < 0.0 {
                let v = -1.0 / (2.0 * coefficients[2]);
                let center = coefficients.get(1).copied().unwrap_or(0.0) * v;
                (center, v.sqrt().max(1.0))
            } else {
                (0.0, 2.0)
            }
        }
        Representation::Grid { grid, .. } => {
            (0.5 * (grid.lo() + grid.hi()), (grid.hi() - grid.lo()) / 16.0)
        }
    }
}

/// Default profile grid: the model's interval domain, or center +- 8
/// scale for whole-line models.
fn profile_grid(model: &LogMarginalModel, eff: &Effective) -> CliResult<EvaluationGrid> {
    Ok(EvaluationGrid::new(eff.grid_lo, eff.grid_hi, eff.grid_nodes)
        .unwrap_or(EvaluationGrid::new(-8.0, 8.0, 401)?)
        .clamp_to_model(model))
}

trait ClampExt {
    fn clamp_to_model(self, model: &LogMarginalModel) -> Self;
}

impl ClampExt for EvaluationGrid {
    fn clamp_to_model(self, model: &LogMarginalModel) -> Self {
        if let Domain::Interval { lo, hi } = model.domain() {
            let new_lo = self.lo().max(lo);
            let new_hi = self.hi().min(hi);
            if new_lo < new_hi {
                return EvaluationGrid::new(new_lo, new_hi, self.n_nodes()).unwrap_or(self);
            }
        }
        self
    }
}

fn polylog_report(model: &LogMarginalModel, strict_rep: bool) -> CliResult<DiagnosticReport> {
    match model.polynomial_coefficients() {
        Some(coeffs) => Ok(polynomial_realizability(coeffs)?),
        None if strict_rep => Err(CliError::invalid(
            "check=polylog needs a polynomial-representation model",
        )),
        None => Ok(DiagnosticReport {
            verdict: Verdict::Realizable,
            test_statistic: f64::NAN,
            threshold: 2.0,
            violations: vec![],
            notes: "non-polynomial log-marginal: the polynomial impossibility theorem imposes no constraint".into(),
        }),
    }
}

pub fn run(args: DiagnoseArgs) -> CliResult<()> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let check = config::pick(args.check, file.check, "all".into());
    let model = model_from_json(&read_file(&args.model)?)?;
    let (center, scale) = model_center_scale(&model);

    let (default_lo, default_hi) = match model.domain() {
        Domain::Interval { lo, hi } => (lo, hi),
        Domain::Real => (center - 8.0 * scale, center + 8.0 * scale),
    };
    let effective = Effective {
        command: "diagnose",
        check: check.clone(),
        grid_lo: config::pick(args.grid_lo, file.grid_lo, default_lo),
        grid_hi: config::pick(args.grid_hi, file.grid_hi, default_hi),
        grid_nodes: config::pick(args.grid_nodes, file.grid_nodes, 401),
        heat_nodes: config::pick(args.heat_nodes, file.heat_nodes, 4096),
        heat_half_width: config::pick(
            args.heat_half_width,
            file.heat_half_width,
            12.0 * scale,
        ),
        tau: config::pick(args.tau, file.tau, 10.0),
        floor: config::pick(args.floor, file.floor, 1e-10),
        strict: args.strict,
    };

    let heat_config = || -> CliResult<HeatTestConfig> {
        Ok(
            HeatTestConfig::centered(center, effective.heat_half_width, effective.heat_nodes)?
                .with_ratio(effective.tau)
                .with_floor(effective.floor),
        )
    };

    let mut verdicts: Vec<Verdict> = Vec::new();
    let output_text = match check.as_str() {
        "all" => {
            let grid = profile_grid(&model, &effective)?;
            let convexity = convexity_check(&model, &grid)?;
            let posvar = posterior_variance_positivity(&model, &grid)?;
            let polylog = polylog_report(&model, false)?;
            let heat = heat_extension_check(&model, &heat_config()?)?;
            verdicts.extend([convexity.verdict, posvar.verdict, polylog.verdict, heat.verdict]);
            let out = AllOutput {
                convexity,
                polylog,
                posvar,
                heat,
                effective_config: config::echo(&effective),
            };
            serde_json::to_string_pretty(&out)?
        }
        name => {
            let report = match name {
                "convexity" => convexity_check(&model, &profile_grid(&model, &effective)?)?,
                "posvar" => {
                    posterior_variance_positivity(&model, &profile_grid(&model, &effective)?)?
                }
                "polylog" => polylog_report(&model, true)?,
                "heat" => heat_extension_check(&model, &heat_config()?)?,
                other => {
                    return Err(CliError::invalid(format!(
                        "unknown check '{other}' (expected convexity | polylog | posvar | heat | all)"
                    )))
                }
            };
            verdicts.push(report.verdict);
            let out = SingleOutput {
                check: name.into(),
                report,
                effective_config: config::echo(&effective),
            };
            serde_json::to_string_pretty(&out)?
        }
    };

    write_file(&args.output, &format!("{output_text}\n"))?;
    if let Some(plot_path) = &args.plot {
        let grid = profile_grid(&model, &effective)?;
        write_file(plot_path, &render_profiles(&model, &grid))?;
    }
    if args.strict && verdicts.contains(&Verdict::NotRealizable) {
        return Err(CliError::Diagnostic(
            "at least one check returned not-realizable".into(),
        ));
    }
    Ok(())
}

/// c(y) = y^2/2 + log m(y) and the posterior-variance profile 1 + l''.
fn render_profiles(model: &LogMarginalModel, grid: &EvaluationGrid) -> String {
    let mut c = Vec::new();
    let mut pv = Vec::new();
    for y in grid.nodes() {
        if let Ok(l) = model.eval(y, 0) {
            c.push((y, 0.5 * y * y + l));
        }
        if let Ok(l2) = model.eval(y, 2) {
            pv.push((y, 1.0 + l2));
        }
    }
    crate::svg::line_chart(
        "realizability profiles",
        &[
            crate::svg::Series { name: "c(y)".into(), points: c },
            crate::svg::Series { name: "1 + l''(y)".into(), points: pv },
        ],
    )
}
