//! CSV input and output. Numbers are written in Rust's shortest
//! round-trip form; leading `#` lines carry provenance and are skipped on
//! read.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::calibrate::Calibration;
use crate::error::{Error, Result};
use crate::select::{CriticalValues, Provenance};

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes `# comment` lines followed by a CSV table.
pub fn write_csv_to<W: Write>(
    out: W,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_csv(path: &Path, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(BufWriter::new(file), comments, header, rows).map_err(|e| Error::io(path, e))
}

/// Header and records of a CSV file, `#` lines skipped.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| Error::csv(path, e))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Parses one numeric column selected by the first matching name.
pub fn read_column(path: &Path, names: &[&str]) -> Result<Vec<f64>> {
    let (header, rows) = read_csv(path)?;
    let idx = header
        .iter()
        .position(|h| names.contains(&h.as_str()))
        .ok_or_else(|| {
            Error::Config(format!(
                "{}: no column named {}",
                path.display(),
                names.join(" or ")
            ))
        })?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let cell = row.get(idx).map(String::as_str).unwrap_or("");
            cell.parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "{}: row {} column {}: cannot parse {cell:?}",
                    path.display(),
                    i + 1,
                    header[idx]
                ))
            })
        })
        .collect()
}

pub fn provenance_comments(p: &Provenance) -> Vec<String> {
    match p {
        Provenance::Manual => vec!["source=manual".into()],
        Provenance::Calibrated {
            r,
            alpha,
            replications,
            seed,
            design_label,
            design_hash,
        } => vec![
            format!("r={r}"),
            format!("alpha={alpha}"),
            format!("replications={replications}"),
            format!("seed={seed}"),
            format!("design={design_label}"),
            format!("design_hash={design_hash}"),
        ],
    }
}

pub const CRITICAL_VALUE_HEADER: [&str; 4] = ["k", "z_k", "achieved_risk_at_K", "target"];

pub fn critical_value_rows(cal: &Calibration) -> Vec<Vec<String>> {
    cal.values
        .values()
        .iter()
        .zip(&cal.stages)
        .enumerate()
        .map(|(i, (z, st))| {
            vec![
                (i + 1).to_string(),
                num(*z),
                num(st.achieved_risk_at_last),
                num(st.target),
            ]
        })
        .collect()
}

pub fn write_critical_values(path: &Path, cal: &Calibration) -> Result<()> {
    write_csv(
        path,
        &provenance_comments(&cal.values.provenance),
        &CRITICAL_VALUE_HEADER,
        &critical_value_rows(cal),
    )
}

/// Reads thresholds from a `z_k` (or `z`) column, ordered by `k` when an
/// index column is present.
pub fn read_critical_values(path: &Path) -> Result<CriticalValues> {
    let z = read_column(path, &["z_k", "z"])?;
    let z = match read_column(path, &["k", "index"]) {
        Ok(k) => {
            let mut pairs: Vec<(f64, f64)> = k.into_iter().zip(z).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (i, (k, _)) in pairs.iter().enumerate() {
                if *k != (i + 1) as f64 {
                    return Err(Error::Config(format!(
                        "{}: indices must be 1..K-1, found {k} at position {}",
                        path.display(),
                        i + 1
                    )));
                }
            }
            pairs.into_iter().map(|(_, z)| z).collect()
        }
        Err(_) => z,
    };
    CriticalValues::manual(z)
}

/// Estimates from an `estimate` (or `theta`) column.
pub fn read_estimates(path: &Path) -> Result<Vec<f64>> {
    read_column(path, &["estimate", "theta"])
}
