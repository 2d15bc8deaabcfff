use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::MetricsRow;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

pub const CSV_HEADER: [&str; 6] = [
    "obstacles",
    "success_rate",
    "collision_rate",
    "timeout_rate",
    "mean_time_s",
    "time_rate",
];

fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

pub fn render_csv(rows: &[MetricsRow]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.obstacles.to_string(),
            fixed(r.success_rate),
            fixed(r.collision_rate),
            fixed(r.timeout_rate),
            r.mean_time_s.map(fixed).unwrap_or_default(),
            r.time_rate.map(fixed).unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| BenchError::Io(e.into_error()))
}

pub fn render_json(rows: &[MetricsRow]) -> Result<Vec<u8>, BenchError> {
    let mut out = serde_json::to_vec_pretty(rows)?;
    out.push(b'\n');
    Ok(out)
}

/// Write `rows` to `path`. Nothing is written for an empty table.
pub fn emit_report(rows: &[MetricsRow], format: ReportFormat, path: &Path) -> Result<(), BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let bytes = match format {
        ReportFormat::Csv => render_csv(rows)?,
        ReportFormat::Json => render_json(rows)?,
    };
    File::create(path)?.write_all(&bytes)?;
    Ok(())
}

/// Parse a CSV report back into rows (rounded values).
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, BenchError> {
            rec[i].parse().map_err(|_| BenchError::Usage(format!("bad number {:?}", &rec[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, BenchError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(MetricsRow {
            obstacles: rec[0].parse().map_err(|_| BenchError::Usage(format!("bad count {:?}", &rec[0])))?,
            success_rate: num(1)?,
            collision_rate: num(2)?,
            timeout_rate: num(3)?,
            mean_time_s: opt(4)?,
            time_rate: opt(5)?,
        });
    }
    Ok(rows)
}
