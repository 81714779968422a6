//! Artifact files: CSV tables with 17 significant digits and JSON documents.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::critical::CriticalPointRecord;
use crate::entropy::EntropyCertificate;
use crate::error::{Error, Result};
use crate::sweepout::WidthCurve;

/// `d.dddddddddddddddde±x`, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns `sigma,beta,argmax`.
pub fn write_width_csv(path: &Path, curve: &WidthCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..curve.len())
        .map(|i| {
            vec![
                fmt_f64(curve.sigmas[i]),
                fmt_f64(curve.betas[i]),
                curve.argmax_frames[i].to_string(),
            ]
        })
        .collect();
    write_csv(path, &["sigma", "beta", "argmax"], &rows)
}

/// Columns `sigma,value,index,nullity,grad_norm,entropy_residual`.
pub fn write_critical_csv(path: &Path, records: &[&CriticalPointRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.sigma),
                fmt_f64(r.value),
                r.index().map(|i| i.to_string()).unwrap_or_default(),
                r.nullity().map(|i| i.to_string()).unwrap_or_default(),
                fmt_f64(r.grad_norm),
                opt(r.entropy_residual),
            ]
        })
        .collect();
    write_csv(
        path,
        &["sigma", "value", "index", "nullity", "grad_norm", "entropy_residual"],
        &rows,
    )
}

/// Width samples next to the entropy-bound overlay where it is defined.
pub fn write_width_entropy_csv(
    path: &Path,
    curve: &WidthCurve,
    certificates: &[EntropyCertificate],
) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..curve.len())
        .map(|i| {
            let c = certificates.iter().find(|c| c.sigma == curve.sigmas[i]);
            vec![
                fmt_f64(curve.sigmas[i]),
                fmt_f64(curve.betas[i]),
                fmt_f64(curve.raw_betas[i]),
                opt(c.map(|c| c.beta_prime_est)),
                opt(c.map(|c| c.bound)),
                opt(c.map(|c| c.slack)),
                c.map(|c| c.accepted().to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["sigma", "beta", "raw_beta", "beta_prime", "bound", "slack", "accepted"],
        &rows,
    )
}

/// One row per eigenvalue of each record.
pub fn write_spectra_csv(path: &Path, records: &[(String, &CriticalPointRecord)]) -> Result<()> {
    let mut rows = Vec::new();
    for (label, r) in records {
        if let Some(m) = &r.morse {
            for (k, l) in m.eigenvalues.iter().enumerate() {
                rows.push(vec![label.clone(), fmt_f64(r.sigma), k.to_string(), fmt_f64(*l)]);
            }
        }
    }
    write_csv(path, &["record", "sigma", "k", "eigenvalue"], &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a CSV written by this module into header and string rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| csv_err(path, e))?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn width_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let curve = WidthCurve::from_samples(vec![0.0, 0.01, 0.02], vec![1.0, 1.1, 1.05]).unwrap();
        let p = dir.path().join("sub/width.csv");
        write_width_csv(&p, &curve).unwrap();
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["sigma", "beta", "argmax"]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2][1].parse::<f64>().unwrap(), curve.betas[2]);
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_json::<serde_json::Value>(Path::new("/nonexistent/run.json")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/run.json"));
    }
}
