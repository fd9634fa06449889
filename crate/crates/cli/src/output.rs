use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use spectr_core::linalg::c;
use spectr_core::{CMat, SpectralDensity};
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Writes to a temporary file in the target directory, then renames it
/// into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Invalid(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    atomic_write(path, &json_bytes(value)?)
}

pub fn spectrum_header(m: usize) -> Vec<String> {
    let mut cols = vec!["theta".to_string()];
    for i in 0..m {
        for j in i..m {
            cols.push(format!("phi_{i}{j}_re"));
            cols.push(format!("phi_{i}{j}_im"));
        }
    }
    cols
}

/// One row per grid point: `θ` then real and imaginary parts of the upper
/// triangle, row by row. Floats use the shortest round-trip representation.
pub fn spectrum_csv(thetas: &[f64], phi: &SpectralDensity) -> String {
    let m = phi.dim();
    let mut out = spectrum_header(m).join(",");
    out.push('\n');
    for (theta, s) in thetas.iter().zip(phi.samples()) {
        out.push_str(&theta.to_string());
        for i in 0..m {
            for j in i..m {
                let z = s[(i, j)];
                out.push_str(&format!(",{},{}", z.re, z.im));
            }
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`spectrum_csv`]: the angles and the Hermitian samples.
pub fn read_spectrum_csv(text: &str) -> CliResult<(Vec<f64>, Vec<CMat>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::Invalid(format!("spectrum table: {e}")))?.clone();
    let pairs = (headers.len() - 1) / 2;
    let m = (0..=pairs).find(|m| m * (m + 1) / 2 == pairs).filter(|&m| m > 0);
    let m = match m {
        Some(m) if headers.iter().collect::<Vec<_>>() == spectrum_header(m) => m,
        _ => return Err(CliError::Invalid("spectrum table: unexpected header".into())),
    };
    let mut thetas = Vec::new();
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Invalid(format!("spectrum table: {e}")))?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Invalid(format!("spectrum table row {}: {e}", line + 1)))?;
        thetas.push(values[0]);
        let mut s = CMat::zeros(m, m);
        let mut idx = 1;
        for i in 0..m {
            for j in i..m {
                s[(i, j)] = c(values[idx], values[idx + 1]);
                s[(j, i)] = s[(i, j)].conj();
                idx += 2;
            }
        }
        samples.push(s);
    }
    Ok((thetas, samples))
}

/// Serializes rows with a header derived from the row type.
pub fn table_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Invalid(format!("table serialization failed: {e}")))?;
    }
    writer.into_inner().map_err(|e| CliError::Invalid(format!("table serialization failed: {e}")))
}
