//! CSV and JSON persistence of estimate records.
//!
//! CSV columns, in order: quantity, d, param1, param2, margin, trials,
//! successes, p_hat, ci_low, ci_high, master_seed. The wall time is kept out
//! of the CSV so reruns are byte-identical; the JSON carries it.

use std::path::Path;

use gfflab_core::observables::EstimateRecord;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, RunnerError};
use crate::fit::FitReport;

pub const CSV_COLUMNS: [&str; 11] = [
    "quantity",
    "d",
    "param1",
    "param2",
    "margin",
    "trials",
    "successes",
    "p_hat",
    "ci_low",
    "ci_high",
    "master_seed",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    quantity: String,
    d: usize,
    param1: u32,
    param2: Option<u32>,
    margin: f64,
    trials: u64,
    successes: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    master_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn to_csv_string(records: &[EstimateRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(CsvRow {
            quantity: r.quantity.clone(),
            d: r.d,
            param1: r.param1,
            param2: r.param2,
            margin: r.margin,
            trials: r.trials,
            successes: r.successes,
            p_hat: r.p_hat,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            master_seed: r.master_seed,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| RunnerError::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn from_csv_str(text: &str) -> Result<Vec<EstimateRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(RunnerError::Config(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let r = row?;
            Ok(EstimateRecord {
                quantity: r.quantity,
                d: r.d,
                param1: r.param1,
                param2: r.param2,
                margin: r.margin,
                trials: r.trials,
                successes: r.successes,
                p_hat: r.p_hat,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                master_seed: r.master_seed,
                wall_time_s: 0.0,
            })
        })
        .collect()
}

/// JSON document: the records plus an optional fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordsDocument {
    pub records: Vec<EstimateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

pub fn export(
    records: &[EstimateRecord],
    fit: Option<&FitReport>,
    format: Format,
    path: &Path,
) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv_string(records)?,
        Format::Json => {
            serde_json::to_string_pretty(&RecordsDocument {
                records: records.to_vec(),
                fit: fit.cloned(),
            })? + "\n"
        }
    };
    write_file(path, &text)
}

/// Load records from a `.csv` or `.json` file (by extension).
pub fn load_records(path: &Path) -> Result<Vec<EstimateRecord>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if path.extension().is_some_and(|e| e == "csv") {
        from_csv_str(&text)
    } else {
        Ok(serde_json::from_str::<RecordsDocument>(&text)?.records)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureEntry {
    pub trial: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureManifest {
    pub quantity: String,
    pub master_seed: u64,
    pub total_trials: u64,
    pub failures: Vec<FailureEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(p1: u32, p2: Option<u32>) -> EstimateRecord {
        EstimateRecord::new("crossing", 3, (p1, p2), 2.0, 1000, 137, 9)
    }

    #[test]
    fn empty_list_gives_header_only() {
        assert_eq!(to_csv_string(&[]).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn every_row_has_eleven_columns() {
        let text = to_csv_string(&[record(4, Some(16)), record(1, None)]).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 11, "{line}");
        }
    }

    #[test]
    fn csv_round_trip_drops_only_wall_time() {
        let mut r = record(4, Some(16));
        r.wall_time_s = 3.5;
        let back = from_csv_str(&to_csv_string(&[r.clone()]).unwrap()).unwrap();
        r.wall_time_s = 0.0;
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut recs = vec![record(4, Some(16)), record(8, None)];
        recs[0].wall_time_s = 1.25;
        export(&recs, None, Format::Json, &path).unwrap();
        assert_eq!(load_records(&path).unwrap(), recs);
    }
}
