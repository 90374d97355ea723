use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ebshrink::fit::{bin_observations, fit_kde, fit_lindsey, fit_npmle_em, fit_scorematch, ScoreMatchConfig};
use ebshrink::rules::{
    james_stein, james_stein_equivalent_model, posterior_mean_from_mixture, sure_estimate,
    tweedie_rule, ShrinkageEstimates,
};
use ebshrink::{
    make_prior, sample_compound, EvaluationGrid, Family, LogMarginalModel, MixingMeasure,
    ObservationSet, PriorSpec,
};

use crate::config;
use crate::errors::{CliError, CliResult};
use crate::util::{cell_seed, with_ext, write_file};

#[derive(Args)]
pub struct BenchArgs {
    /// Sweep description JSON: {"priors": [...], "rules": [...],
    /// "sample_sizes": [...], "replications": r, "base_seed": s}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replications per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed for per-cell seed derivation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Comma-separated rule names (james-stein | oracle | npmle | kde |
    /// lindsey | scorematch).
    #[arg(long)]
    pub rules: Option<String>,
    /// Output CSV; the JSON table goes to <stem>.json.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    priors: Vec<PriorSpec>,
    rules: Vec<String>,
    sample_sizes: Vec<usize>,
    replications: usize,
    base_seed: u64,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            priors: vec![
                PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 },
                PriorSpec::Gaussian { mean: 0.0, sd: 1.0, n_atoms: 201 },
                PriorSpec::SpikeSlab { p0: 0.9, slab_sd: 3.0, n_atoms: 201 },
            ],
            rules: vec!["james-stein".into(), "oracle".into(), "npmle".into()],
            sample_sizes: vec![500],
            replications: 10,
            base_seed: 1,
        }
    }
}

#[derive(Serialize)]
struct Effective {
    command: &'static str,
    priors: Vec<PriorSpec>,
    rules: Vec<String>,
    sample_sizes: Vec<usize>,
    replications: usize,
    base_seed: u64,
}

/// One aggregated sweep cell. `regret = mse - oracle_mse` exactly, from
/// the two reported columns. Wall time is the only field allowed to vary
/// between runs of the same sweep.
#[derive(Debug, Serialize)]
struct BenchRow {
    rule_name: String,
    prior_name: String,
    n: usize,
    mse: Option<f64>,
    oracle_mse: Option<f64>,
    regret: Option<f64>,
    sure: Option<f64>,
    wall_time: f64,
    note: String,
}

#[derive(Serialize)]
struct BenchJson {
    rows: Vec<serde_json::Value>,
    effective_config: Value,
}

fn apply_rule(
    rule: &str,
    obs: &ObservationSet,
    true_prior: &MixingMeasure,
) -> CliResult<(ShrinkageEstimates, Option<f64>)> {
    let tweedie_with = |model: &LogMarginalModel| -> CliResult<(ShrinkageEstimates, Option<f64>)> {
        let est = tweedie_rule(model, obs)?;
        let sure = sure_estimate(model, obs).ok().map(|s| s.value);
        Ok((est, sure))
    };
    match rule {
        "james-stein" => {
            let est = james_stein(obs)?;
            let sure = james_stein_equivalent_model(obs)
                .and_then(|m| sure_estimate(&m, obs))
                .ok()
                .map(|s| s.value);
            Ok((est, sure))
        }
        "oracle" => {
            let est = posterior_mean_from_mixture(true_prior, obs, obs.noise_sd())?;
            let model = LogMarginalModel::from_mixture(true_prior.clone(), obs.noise_sd())?;
            let sure = sure_estimate(&model, obs).ok().map(|s| s.value);
            Ok((est, sure))
        }
        "npmle" => {
            let grid = EvaluationGrid::new(obs.min(), obs.max(), 300)?;
            let (prior, _) = fit_npmle_em(obs, &grid, 1e-8, 1000)?;
            let model = LogMarginalModel::from_mixture(prior, obs.noise_sd())?
                .with_source(ebshrink::ModelSource::Npmle);
            tweedie_with(&model)
        }
        "kde" => {
            let model = fit_kde(obs, None)?;
            tweedie_with(&model)
        }
        "lindsey" => {
            let binning = bin_observations(obs, 60)?;
            let (model, _) = fit_lindsey(&binning, 5)?;
            tweedie_with(&model)
        }
        "scorematch" => {
            let grid = EvaluationGrid::default_for(obs)?;
            let (model, _) = fit_scorematch(obs, &ScoreMatchConfig::new(grid))?;
            tweedie_with(&model)
        }
        other => Err(CliError::invalid(format!("unknown bench rule '{other}'"))),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let mut file: FileConfig = config::load(args.config.as_deref())?;
    if let Some(reps) = args.reps {
        file.replications = reps;
    }
    if let Some(seed) = args.seed {
        file.base_seed = seed;
    }
    if let Some(sizes) = &args.sizes {
        file.sample_sizes = sizes
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::invalid(format!("--sizes: {e}")))?;
    }
    if let Some(rules) = &args.rules {
        file.rules = rules.split(',').map(|s| s.trim().to_string()).collect();
    }
    if file.replications == 0 || file.priors.is_empty() || file.rules.is_empty() {
        return Err(CliError::invalid("bench needs priors, rules and replications >= 1"));
    }
    let effective = Effective {
        command: "bench",
        priors: file.priors.clone(),
        rules: file.rules.clone(),
        sample_sizes: file.sample_sizes.clone(),
        replications: file.replications,
        base_seed: file.base_seed,
    };

    let mut rows: Vec<BenchRow> = Vec::new();
    for prior_spec in &file.priors {
        let prior = make_prior(prior_spec)?;
        for rule in &file.rules {
            for &n in &file.sample_sizes {
                let started = Instant::now();
                let mut mse_sum = 0.0;
                let mut oracle_sum = 0.0;
                let mut sure_sum = 0.0;
                let mut sure_count = 0usize;
                let mut failure: Option<String> = None;
                for rep in 0..file.replications {
                    let seed = cell_seed(file.base_seed, prior.label(), rule, n, rep);
                    let outcome = (|| -> CliResult<(f64, f64, Option<f64>)> {
                        let (truth, obs) =
                            sample_compound(&prior, n, seed, Family::GaussianLocation, 1.0)?;
                        let (est, sure) = apply_rule(rule, &obs, &prior)?;
                        let mse = est.mse_against(&truth);
                        let oracle_est =
                            posterior_mean_from_mixture(&prior, &obs, obs.noise_sd())?;
                        Ok((mse, oracle_est.mse_against(&truth), sure))
                    })();
                    match outcome {
                        Ok((mse, oracle_mse, sure)) => {
                            mse_sum += mse;
                            oracle_sum += oracle_mse;
                            if let Some(s) = sure {
                                sure_sum += s;
                                sure_count += 1;
                            }
                        }
                        Err(e) => {
                            failure = Some(e.to_string());
                            break;
                        }
                    }
                }
                let wall_time = started.elapsed().as_secs_f64();
                let row = match failure {
                    Some(note) => BenchRow {
                        rule_name: rule.clone(),
                        prior_name: prior.label().to_string(),
                        n,
                        mse: None,
                        oracle_mse: None,
                        regret: None,
                        sure: None,
                        wall_time,
                        note,
                    },
                    None => {
                        let reps = file.replications as f64;
                        let mse = mse_sum / reps;
                        let oracle_mse = oracle_sum / reps;
                        BenchRow {
                            rule_name: rule.clone(),
                            prior_name: prior.label().to_string(),
                            n,
                            mse: Some(mse),
                            oracle_mse: Some(oracle_mse),
                            regret: Some(mse - oracle_mse),
                            sure: if sure_count == file.replications {
                                Some(sure_sum / reps)
                            } else {
                                None
                            },
                            wall_time,
                            note: String::new(),
                        }
                    }
                };
                rows.push(row);
            }
        }
    }

    let mut csv = String::from(
        "rule_name,prior_name,n,mse,oracle_mse,regret,sure,wall_time,note\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.rule_name,
            r.prior_name,
            r.n,
            fmt_opt(r.mse),
            fmt_opt(r.oracle_mse),
            fmt_opt(r.regret),
            fmt_opt(r.sure),
            r.wall_time,
            r.note
        ));
    }
    write_file(&args.output, &csv)?;
    let json = BenchJson {
        rows: rows
            .iter()
            .map(|r| serde_json::to_value(r).expect("bench row serializes"))
            .collect(),
        effective_config: config::echo(&effective),
    };
    write_file(
        &with_ext(&args.output, "json"),
        &format!("{}\n", serde_json::to_string_pretty(&json)?),
    )?;
    Ok(())
}
