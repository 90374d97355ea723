use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ebshrink::io::{estimates_to_csv, model_from_json};
use ebshrink::rules::{
    james_stein, james_stein_equivalent_model, posterior_mean_from_mixture, robbins_poisson_rule,
    sure_estimate, tweedie_rule, ShrinkageEstimates, SureValue,
};

use crate::config;
use crate::errors::{CliError, CliResult};
use crate::util::{load_observations, read_file, with_ext, write_file};

#[derive(Args)]
pub struct EstimateArgs {
    /// Rule: tweedie | james-stein | mixture-posterior | robbins.
    #[arg(long)]
    pub rule: Option<String>,
    /// Observations CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Fitted model JSON (required for tweedie and mixture-posterior).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Isotonic smoothing for robbins.
    #[arg(long, default_value_t = false)]
    pub smoothed: bool,
    /// Output y,delta CSV; the summary goes to <stem>.summary.json.
    #[arg(long, short)]
    pub output: PathBuf,
    /// JSON config file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    rule: Option<String>,
    smoothed: Option<bool>,
}

#[derive(Serialize)]
struct Effective {
    command: &'static str,
    rule: String,
    smoothed: bool,
    model: Option<String>,
}

#[derive(Serialize)]
struct Summary {
    rule: String,
    model_provenance: String,
    n: usize,
    sure: Option<SureValue>,
    effective_config: Value,
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let rule = config::pick(args.rule, file.rule, "tweedie".into());
    let smoothed = args.smoothed || file.smoothed.unwrap_or(false);
    let effective = Effective {
        command: "estimate",
        rule: rule.clone(),
        smoothed,
        model: args.model.as_ref().map(|p| p.display().to_string()),
    };

    let obs = load_observations(&args.input)?;
    let load_model = || -> CliResult<ebshrink::LogMarginalModel> {
        let path = args.model.as_ref().ok_or_else(|| {
            CliError::invalid(format!("rule '{rule}' requires --model"))
        })?;
        Ok(model_from_json(&read_file(path)?)?)
    };

    let (estimates, sure): (ShrinkageEstimates, Option<SureValue>) = match rule.as_str() {
        "tweedie" => {
            let model = load_model()?;
            let est = tweedie_rule(&model, &obs)?;
            let sure = sure_estimate(&model, &obs).ok();
            (est, sure)
        }
        "mixture-posterior" => {
            let model = load_model()?;
            let (prior, noise_sd) = model.mixture().ok_or_else(|| {
                CliError::invalid("mixture-posterior requires a mixture-backed model")
            })?;
            let est = posterior_mean_from_mixture(prior, &obs, noise_sd)?;
            let sure = sure_estimate(&model, &obs).ok();
            (est, sure)
        }
        "james-stein" => {
            let est = james_stein(&obs)?;
            // SURE through the equivalent quadratic log-marginal.
            let sure = james_stein_equivalent_model(&obs)
                .and_then(|m| sure_estimate(&m, &obs))
                .ok();
            (est, sure)
        }
        "robbins" => (robbins_poisson_rule(&obs, smoothed)?, None),
        other => {
            return Err(CliError::invalid(format!(
                "unknown rule '{other}' (expected tweedie | james-stein | mixture-posterior | robbins)"
            )))
        }
    };

    write_file(&args.output, &estimates_to_csv(&estimates))?;
    let summary = Summary {
        rule: estimates.rule_name.clone(),
        model_provenance: estimates.model_provenance.clone(),
        n: estimates.inputs.len(),
        sure,
        effective_config: config::echo(&effective),
    };
    write_file(
        &with_ext(&args.output, "summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    Ok(())
}
