//! File formats: observation CSV + JSON sidecar, model JSON, estimates
//! CSV, histogram CSV.
//!
//! CSV dialect everywhere: comma separator, `.` decimal point, mandatory
//! header row, UTF-8. Floats are written in Rust's shortest round-trip
//! form, so read-then-rewrite is byte-identical.

use serde::{Deserialize, Serialize};

use crate::data::{Family, ObservationSet};
use crate::error::{Error, Result};
use crate::fit::HistogramBinning;
use crate::grid::EvaluationGrid;
use crate::model::{Domain, LogMarginalModel, ModelSource, Representation};
use crate::prior::MixingMeasure;
use crate::rules::ShrinkageEstimates;

/// Sidecar metadata accompanying an observations CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSidecar {
    pub family: Family,
    pub noise_sd: f64,
    pub seed: Option<u64>,
}

impl ObservationSidecar {
    pub fn of(obs: &ObservationSet) -> Self {
        Self { family: obs.family(), noise_sd: obs.noise_sd(), seed: obs.seed() }
    }
}

/// One value per row under a mandatory `y` header.
pub fn observations_to_csv(obs: &ObservationSet) -> String {
    let mut out = String::from("y\n");
    for v in obs.values() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Parse an observations CSV; errors carry the 1-based line number.
pub fn observations_from_csv(text: &str, sidecar: &ObservationSidecar) -> Result<ObservationSet> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "y" => {}
        Some((_, header)) => {
            return Err(Error::InvalidInput(format!(
                "line 1: expected header 'y', found '{header}'"
            )))
        }
        None => return Err(Error::InvalidInput("empty CSV".into())),
    }
    let mut values = Vec::new();
    for (idx, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            Error::InvalidInput(format!("line {}: cannot parse '{trimmed}' as a number", idx + 1))
        })?;
        values.push(v);
    }
    ObservationSet::new(values, sidecar.family, sidecar.noise_sd, sidecar.seed)
}

/// Estimates CSV under the `y,delta` header.
pub fn estimates_to_csv(est: &ShrinkageEstimates) -> String {
    let mut out = String::from("y,delta\n");
    for (y, d) in est.inputs.iter().zip(&est.estimates) {
        out.push_str(&format!("{y},{d}\n"));
    }
    out
}

/// Parse a `y,delta` CSV back into (input, estimate) pairs.
pub fn estimates_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "y,delta" => {}
        Some((_, header)) => {
            return Err(Error::InvalidInput(format!(
                "line 1: expected header 'y,delta', found '{header}'"
            )))
        }
        None => return Err(Error::InvalidInput("empty CSV".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                Error::InvalidInput(format!("line {}: malformed row '{trimmed}'", idx + 1))
            })
        };
        let y = parse(parts.next())?;
        let d = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::InvalidInput(format!(
                "line {}: expected two columns",
                idx + 1
            )));
        }
        rows.push((y, d));
    }
    Ok(rows)
}

/// Histogram CSV under the `edge_lo,edge_hi,count` header.
pub fn histogram_to_csv(binning: &HistogramBinning) -> String {
    let mut out = String::from("edge_lo,edge_hi,count\n");
    for (w, c) in binning.bin_edges().windows(2).zip(binning.counts()) {
        out.push_str(&format!("{},{},{c}\n", w[0], w[1]));
    }
    out
}

pub fn histogram_from_csv(text: &str) -> Result<HistogramBinning> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "edge_lo,edge_hi,count" => {}
        _ => {
            return Err(Error::InvalidInput(
                "expected header 'edge_lo,edge_hi,count'".into(),
            ))
        }
    }
    let mut edges: Vec<f64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for (idx, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "line {}: expected three columns",
                idx + 1
            )));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("line {}: bad edge '{}'", idx + 1, parts[0]))
        })?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("line {}: bad edge '{}'", idx + 1, parts[1]))
        })?;
        let count: u64 = parts[2].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("line {}: bad count '{}'", idx + 1, parts[2]))
        })?;
        if edges.is_empty() {
            edges.push(lo);
        }
        edges.push(hi);
        counts.push(count);
    }
    HistogramBinning::new(edges, counts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "kebab-case")]
enum ModelJson {
    Polynomial {
        coefficients: Vec<f64>,
        domain: DomainJson,
        log_norm_const: f64,
        source: String,
    },
    Grid {
        lo: f64,
        hi: f64,
        n_nodes: usize,
        values: Vec<f64>,
        log_norm_const: f64,
        source: String,
    },
    Mixture {
        support: Vec<f64>,
        weights: Vec<f64>,
        label: String,
        noise_sd: f64,
        log_norm_const: f64,
        source: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum DomainJson {
    Real(String),
    Interval { lo: f64, hi: f64 },
}

fn source_to_string(s: ModelSource) -> String {
    s.to_string()
}

fn source_from_string(s: &str) -> ModelSource {
    match s {
        "mixture-prior" => ModelSource::MixturePrior,
        "kde" => ModelSource::Kde,
        "lindsey" => ModelSource::Lindsey,
        "npmle" => ModelSource::Npmle,
        "scorematch" => ModelSource::ScoreMatch,
        _ => ModelSource::Manual,
    }
}

/// Serialize a model to its JSON schema.
pub fn model_to_json(model: &LogMarginalModel) -> String {
    let json = match model.representation() {
        Representation::Polynomial { coefficients } => ModelJson::Polynomial {
            coefficients: coefficients.clone(),
            domain: match model.domain() {
                Domain::Real => DomainJson::Real("real".into()),
                Domain::Interval { lo, hi } => DomainJson::Interval { lo, hi },
            },
            log_norm_const: model.log_norm_const(),
            source: source_to_string(model.source()),
        },
        Representation::Grid { grid, values } => ModelJson::Grid {
            lo: grid.lo(),
            hi: grid.hi(),
            n_nodes: grid.n_nodes(),
            values: values.clone(),
            log_norm_const: model.log_norm_const(),
            source: source_to_string(model.source()),
        },
        Representation::Mixture { prior, noise_sd } => ModelJson::Mixture {
            support: prior.support().to_vec(),
            weights: prior.weights().to_vec(),
            label: prior.label().to_string(),
            noise_sd: *noise_sd,
            log_norm_const: model.log_norm_const(),
            source: source_to_string(model.source()),
        },
    };
    serde_json::to_string_pretty(&json).expect("model JSON serialization cannot fail")
}

/// Deserialize a model from its JSON schema. The normalization constant
/// is recomputed from the payload (deterministically, so round-trips of
/// files written by this library are byte-identical).
pub fn model_from_json(text: &str) -> Result<LogMarginalModel> {
    let json: ModelJson = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("model JSON: {e}")))?;
    match json {
        ModelJson::Polynomial { coefficients, domain, source, .. } => {
            let domain = match domain {
                DomainJson::Real(tag) if tag == "real" => Domain::Real,
                DomainJson::Real(tag) => {
                    return Err(Error::InvalidInput(format!("unknown domain '{tag}'")))
                }
                DomainJson::Interval { lo, hi } => Domain::Interval { lo, hi },
            };
            LogMarginalModel::polynomial_with_source(
                coefficients,
                domain,
                source_from_string(&source),
            )
        }
        ModelJson::Grid { lo, hi, n_nodes, values, source, .. } => {
            let grid = EvaluationGrid::new(lo, hi, n_nodes)?;
            LogMarginalModel::from_grid(grid, values, source_from_string(&source))
        }
        ModelJson::Mixture { support, weights, label, noise_sd, source, .. } => {
            let prior = MixingMeasure::new(support, weights, label)?;
            LogMarginalModel::from_mixture_with_source(
                prior,
                noise_sd,
                source_from_string(&source),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::bin_observations;
    use crate::prior::{make_prior, PriorSpec};
    use crate::rules::james_stein;
    use crate::simulate::sample_compound;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn observation_csv_round_trip_is_byte_identical() {
        let prior = make_prior(&PriorSpec::TwoPoint { a: -2.0, b: 2.0, p: 0.5 }).unwrap();
        let (_, obs) = sample_compound(&prior, 50, 3, Family::GaussianLocation, 1.0).unwrap();
        let csv = observations_to_csv(&obs);
        let sidecar = ObservationSidecar::of(&obs);
        let back = observations_from_csv(&csv, &sidecar).unwrap();
        assert_eq!(back.values(), obs.values());
        assert_eq!(observations_to_csv(&back), csv);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let err = observations_from_csv("y\n1.0\nnot-a-number\n", &ObservationSidecar {
            family: Family::GaussianLocation,
            noise_sd: 1.0,
            seed: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn estimates_csv_round_trips() {
        let obs = ObservationSet::gaussian(vec![1.0, -0.5, 2.25]).unwrap();
        let est = james_stein(&obs).unwrap();
        let csv = estimates_to_csv(&est);
        assert!(csv.starts_with("y,delta\n"));
        let rows = estimates_from_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        let rewritten = {
            let mut out = String::from("y,delta\n");
            for (y, d) in &rows {
                out.push_str(&format!("{y},{d}\n"));
            }
            out
        };
        assert_eq!(rewritten, csv);
    }

    #[test]
    fn histogram_csv_round_trips() {
        let obs = ObservationSet::gaussian(vec![0.0, 0.5, 1.0, 1.5, 3.0, 3.2]).unwrap();
        let b = bin_observations(&obs, 5).unwrap();
        let csv = histogram_to_csv(&b);
        let back = histogram_from_csv(&csv).unwrap();
        assert_eq!(back, b);
        assert_eq!(histogram_to_csv(&back), csv);
    }

    #[test]
    fn model_json_round_trips_all_representations() {
        let poly = LogMarginalModel::polynomial(vec![0.1, 0.0, -0.3], Domain::Real).unwrap();
        let grid = EvaluationGrid::new(-5.0, 5.0, 64).unwrap();
        let values: Vec<f64> = grid.nodes().iter().map(|y| -0.25 * y * y).collect();
        let gridm = LogMarginalModel::from_grid(grid, values, ModelSource::ScoreMatch).unwrap();
        let mix = LogMarginalModel::from_mixture(
            make_prior(&PriorSpec::TwoPoint { a: -1.0, b: 1.0, p: 0.5 }).unwrap(),
            1.0,
        )
        .unwrap();
        for model in [poly, gridm, mix] {
            let json = model_to_json(&model);
            assert!(json.contains("\"representation\""));
            assert!(json.contains("log_norm_const"));
            let back = model_from_json(&json).unwrap();
            assert_eq!(model_to_json(&back), json, "round trip not byte-identical");
            for y in [-1.0, 0.0, 0.7] {
                assert_abs_diff_eq!(
                    back.eval(y, 0).unwrap(),
                    model.eval(y, 0).unwrap(),
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    back.eval(y, 2).unwrap(),
                    model.eval(y, 2).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    proptest! {
        #[test]
        fn observation_csv_round_trip_property(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let obs = ObservationSet::gaussian(values).unwrap();
            let sidecar = ObservationSidecar::of(&obs);
            let csv = observations_to_csv(&obs);
            let back = observations_from_csv(&csv, &sidecar).unwrap();
            prop_assert_eq!(back.values(), obs.values());
            prop_assert_eq!(observations_to_csv(&back), csv);
        }
    }
}
