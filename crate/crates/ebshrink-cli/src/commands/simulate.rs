use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ebshrink::io::observations_to_csv;
use ebshrink::{make_prior, sample_compound, Family, PriorSpec};

use crate::config;
use crate::errors::{CliError, CliResult};
use crate::util::{sidecar_path, write_file};

#[derive(Args)]
pub struct SimulateArgs {
    /// Prior descriptor as inline JSON, e.g.
    /// '{"kind":"two-point","a":-2,"b":2,"p":0.5}'.
    #[arg(long)]
    pub prior: Option<String>,
    /// Number of observations.
    #[arg(long)]
    pub n: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Likelihood family: gaussian-location | poisson-count | gaussian-scale.
    #[arg(long)]
    pub family: Option<String>,
    /// Noise standard deviation (gaussian-location only).
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Output CSV path; a JSON sidecar is written next to it.
    #[arg(long, short)]
    pub output: PathBuf,
    /// JSON config file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    prior: Option<PriorSpec>,
    n: Option<usize>,
    seed: Option<u64>,
    family: Option<String>,
    noise_sd: Option<f64>,
}

#[derive(Serialize)]
struct EffectiveConfig {
    command: &'static str,
    prior: PriorSpec,
    n: usize,
    seed: u64,
    family: String,
    noise_sd: f64,
}

/// Sidecar: everything needed to reproduce and evaluate the draw.
#[derive(Serialize)]
struct Sidecar {
    family: String,
    noise_sd: f64,
    seed: u64,
    prior: PriorSpec,
    true_means: Vec<f64>,
    effective_config: Value,
}

pub fn parse_family(name: &str) -> CliResult<Family> {
    match name {
        "gaussian-location" => Ok(Family::GaussianLocation),
        "poisson-count" => Ok(Family::PoissonCount),
        "gaussian-scale" => Ok(Family::GaussianScale),
        other => Err(CliError::invalid(format!("unknown family '{other}'"))),
    }
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let prior_spec = match args.prior {
        Some(text) => serde_json::from_str::<PriorSpec>(&text)
            .map_err(|e| CliError::invalid(format!("--prior: {e}")))?,
        None => file
            .prior
            .ok_or_else(|| CliError::invalid("a prior descriptor is required (--prior or config)"))?,
    };
    let n = config::pick(args.n, file.n, 100);
    let seed = config::pick(args.seed, file.seed, 0);
    let family_name = config::pick(args.family, file.family, "gaussian-location".into());
    let noise_sd = config::pick(args.noise_sd, file.noise_sd, 1.0);
    let family = parse_family(&family_name)?;

    let prior = make_prior(&prior_spec)?;
    let (true_means, obs) = sample_compound(&prior, n, seed, family, noise_sd)?;

    let effective = EffectiveConfig {
        command: "simulate",
        prior: prior_spec.clone(),
        n,
        seed,
        family: family_name.clone(),
        noise_sd,
    };
    let sidecar = Sidecar {
        family: family_name,
        noise_sd,
        seed,
        prior: prior_spec,
        true_means,
        effective_config: config::echo(&effective),
    };

    write_file(&args.output, &observations_to_csv(&obs))?;
    write_file(
        &sidecar_path(&args.output),
        &format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
    )?;
    Ok(())
}
