//! CSV and JSON output. Field order of the record structs is the column order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn to_csv<T: Serialize>(records: &[T]) -> std::result::Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("records serialize");
    s.push('\n');
    s
}

pub fn render<T: Serialize>(records: &[T], format: Format) -> std::result::Result<String, csv::Error> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => Ok(to_json(records)),
    }
}

/// Writes `records` to `path`. Fails on an empty record list.
pub fn emit<T: Serialize>(records: &[T], format: Format, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(HarnessError::Empty { path: path.into() });
    }
    let text = render(records, format).map_err(|source| HarnessError::Csv { path: path.into(), source })?;
    write(path, &text)
}

/// Writes any serializable document (graph, requests) as JSON.
pub fn emit_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    write(path, &to_json(value))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
    }
    std::fs::write(path, text).map_err(|source| HarnessError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Algorithm;
    use crate::harness::{SlotMetrics, TraceRow};

    fn row(phi: f64) -> SlotMetrics {
        SlotMetrics {
            slot: 0,
            algorithm: Algorithm::Pgra,
            seed: 7,
            phi,
            allocated_fraction: 1.0,
            mean_bw: 0.1,
            mean_power: 0.2,
            mean_delay: 1.0 / 3.0,
            iterations: 4,
        }
    }

    #[test]
    fn metrics_header() {
        let csv = to_csv(&[row(1.5)]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("slot,algorithm,seed,phi,allocated_fraction,mean_bw,mean_power,mean_delay,iterations"));
        assert_eq!(lines.next(), Some("0,pgra,7,1.5,1.0,0.1,0.2,0.3333333333333333,4"));
    }

    #[test]
    fn trace_winner_may_be_empty() {
        let csv = to_csv(&[
            TraceRow { iteration: 1, winner: Some(3), phi: 0.9, improvement: 0.9 },
            TraceRow { iteration: 2, winner: None, phi: 0.9, improvement: 0.0 },
        ])
        .unwrap();
        assert_eq!(csv, "iteration,winner,phi,improvement\n1,3,0.9,0.9\n2,,0.9,0.0\n");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rows = vec![row(0.1 + 0.2), row(1e-300), row(2.0f64.sqrt())];
        let back: Vec<SlotMetrics> = serde_json::from_str(&to_json(&rows)).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_records_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        assert!(matches!(emit::<SlotMetrics>(&[], Format::Csv, &path), Err(HarnessError::Empty { .. })));
    }
}
