//! Small shared helpers: sidecar paths, deterministic cell seeds, file
//! writes with contextual errors.

use std::path::{Path, PathBuf};

use ebshrink::io::ObservationSidecar;
use ebshrink::ObservationSet;

use crate::errors::{CliError, CliResult};

/// Path with the extension replaced by `ext`.
pub fn with_ext(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}

/// Sidecar JSON path for an observations CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    with_ext(csv, "json")
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::invalid(format!("writing {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("reading {}: {e}", path.display())))
}

/// Load observations: CSV plus its JSON sidecar (for family, noise scale
/// and seed). A missing sidecar defaults to unit-noise gaussian-location.
pub fn load_observations(csv_path: &Path) -> CliResult<ObservationSet> {
    let csv = read_file(csv_path)?;
    let sidecar = match std::fs::read_to_string(sidecar_path(csv_path)) {
        Ok(text) => {
            // The simulate sidecar is a superset of ObservationSidecar.
            serde_json::from_str::<ObservationSidecar>(&text)
                .map_err(|e| CliError::invalid(format!("sidecar: {e}")))?
        }
        Err(_) => ObservationSidecar {
            family: ebshrink::Family::GaussianLocation,
            noise_sd: 1.0,
            seed: None,
        },
    };
    Ok(ebshrink::io::observations_from_csv(&csv, &sidecar)?)
}

/// Deterministic 64-bit FNV-1a over a canonical key string. Wired as the
/// per-cell seed derivation so bench results are independent of cell
/// scheduling.
pub fn fnv1a64(key: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in key.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Seed for one bench cell.
pub fn cell_seed(base_seed: u64, prior_label: &str, rule: &str, n: usize, rep: usize) -> u64 {
    fnv1a64(&format!("{base_seed}|{prior_label}|{rule}|{n}|{rep}"))
}
