//! Config-file support and the effective-config echo.
//!
//! Precedence: command-line flags override the JSON config file, which
//! overrides built-in defaults. Every output JSON embeds the effective
//! (post-merge) configuration for provenance.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::errors::{CliError, CliResult};

/// Load an optional JSON config file into the command's partial-config
/// type. Missing path means all-defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::invalid(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::invalid(format!("config {}: {e}", p.display())))
        }
    }
}

/// Flag-over-config-over-default merge for one field.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// The effective config as a JSON value, ready for embedding.
pub fn echo<T: serde::Serialize>(cfg: &T) -> Value {
    serde_json::to_value(cfg).expect("effective config serializes")
}
