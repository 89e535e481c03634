use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EstimatorConfig, IteResult, Method, OobFlags};
use crate::error::{Error, Result};

/// Reads a headerless file of one real per line.
pub fn read_tau_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Ingest {
            row: k + 1,
            column: "tau".into(),
            message: format!("'{line}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Ingest {
                row: k + 1,
                column: "tau".into(),
                message: "value is not finite".into(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Writes one value per line using the shortest representation that
/// parses back to the same `f64`.
pub fn export_tau(path: &Path, tau: &[f64]) -> Result<()> {
    let mut buf = String::with_capacity(tau.len() * 20);
    for v in tau {
        buf.push_str(&format!("{v}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(buf.as_bytes())?;
    Ok(())
}

/// Wraps externally computed effects (e.g. from BART) for the benchmark.
pub fn import_external_ite(path: &Path, n: usize) -> Result<IteResult> {
    let tau_hat = read_tau_file(path)?;
    if tau_hat.len() != n {
        return Err(Error::Format(format!(
            "{} has {} values, expected {n}",
            path.display(),
            tau_hat.len()
        )));
    }
    Ok(IteResult {
        method: Method::External,
        tau_hat,
        oob_flags: vec![OobFlags::default(); n],
        potential_outcomes: None,
        config: EstimatorConfig::External,
    })
}
