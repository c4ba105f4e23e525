//! CSV tables and JSON reports.
//!
//! CSV floats use 17 significant digits in scientific notation, which
//! round-trips every `f64`. JSON floats use the shortest round-tripping
//! form. Neither depends on the platform or on the run, so identical inputs
//! give identical bytes (the wall time is the one exception, see
//! [`Report::wall_time_seconds`]).

use std::fs;
use std::path::{Path, PathBuf};

use anderson_lab_core::stats::{EstimatorResult, ScanPoint};
use serde::Serialize;

use crate::error::LabError;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 4] = ["abscissa", "mean", "stderr", "n"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub abscissa: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Row {
    pub fn from_estimate(abscissa: f64, r: &EstimatorResult) -> Self {
        Row { abscissa, mean: r.mean, stderr: r.stderr, n: r.n_realizations }
    }
}

impl From<&ScanPoint> for Row {
    fn from(p: &ScanPoint) -> Self {
        Row { abscissa: p.abscissa, mean: p.mean, stderr: p.stderr, n: p.n }
    }
}

/// Rows of one statistic; the name is used in error messages.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub statistic: String,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(statistic: impl Into<String>, rows: Vec<Row>) -> Self {
        Table { statistic: statistic.into(), rows }
    }

    pub fn from_points(statistic: impl Into<String>, points: &[ScanPoint]) -> Self {
        Self::new(statistic, points.iter().map(Row::from).collect())
    }

    fn check_finite(&self) -> Result<(), LabError> {
        let finite = |r: &Row| r.abscissa.is_finite() && r.mean.is_finite() && r.stderr.is_finite();
        if self.rows.iter().all(finite) {
            Ok(())
        } else {
            Err(LabError::NonFinite(self.statistic.clone()))
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, LabError> {
        self.check_finite()?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| LabError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([format_float(r.abscissa), format_float(r.mean), format_float(r.stderr), r.n.to_string()])
                .map_err(io)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.to_string()))
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

pub const SOFTWARE: Software = Software { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") };

#[derive(Debug, Serialize)]
pub struct Report<'a, S: Serialize, T: Serialize> {
    pub schema_version: u32,
    pub software: Software,
    pub command: &'a str,
    /// The resolved experiment: config after command-line overrides, and
    /// the command's parameters.
    pub spec: &'a S,
    pub seed: u64,
    /// Elapsed seconds; `null` under `--fixed-clock`.
    pub wall_time_seconds: Option<f64>,
    pub result: &'a T,
}

impl<S: Serialize, T: Serialize> Report<'_, S, T> {
    pub fn to_json(&self) -> Result<Vec<u8>, LabError> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| LabError::Io(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Output locations for one run: `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        OutputPaths { csv: dir.join(format!("{stem}.csv")), json: dir.join(format!("{stem}.json")) }
    }
}

/// Serializes both files before writing either, so a refused table leaves
/// no partial output behind.
pub fn emit<S: Serialize, T: Serialize>(table: &Table, report: &Report<S, T>, paths: &OutputPaths) -> Result<(), LabError> {
    let csv = table.to_csv()?;
    let json = report.to_json()?;
    for path in [&paths.csv, &paths.json] {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
            }
        }
    }
    fs::write(&paths.csv, csv).map_err(|e| LabError::Io(format!("{}: {e}", paths.csv.display())))?;
    fs::write(&paths.json, json).map_err(|e| LabError::Io(format!("{}: {e}", paths.json.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let csv = Table::new("x", vec![]).to_csv().unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "abscissa,mean,stderr,n\n");
    }

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn nan_is_refused_with_name() {
        let t = Table::new("mean-overlap", vec![Row { abscissa: 0.0, mean: f64::NAN, stderr: 0.0, n: 1 }]);
        match t.to_csv() {
            Err(e @ LabError::NonFinite(_)) => {
                assert!(e.to_string().contains("mean-overlap"));
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rows_in_fixed_order() {
        let t = Table::new("x", vec![Row { abscissa: 1.0, mean: 0.5, stderr: 0.25, n: 3 }]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s.lines().nth(1).unwrap(), "1.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1,3");
    }
}
