use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::executor::{AuditCounts, ExecutionLog, Method};

/// One (scene, method, seed) cell. Times are virtual seconds, so the report
/// does not depend on the machine it ran on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene_id: String,
    pub method: Method,
    pub seed: u64,
    pub success: bool,
    pub planning_time_s: f64,
    pub execution_time_s: f64,
    pub percent_open_loop: f64,
    pub e_real_expected: Option<f64>,
    pub e_nominal_expected: Option<f64>,
}

impl BenchRow {
    pub fn from_log(log: &ExecutionLog) -> Self {
        let s = &log.summary;
        BenchRow {
            scene_id: log.scene_id.clone(),
            method: log.method,
            seed: log.seed,
            success: s.success,
            planning_time_s: s.virtual_planning_time_s,
            execution_time_s: s.virtual_execution_time_s,
            percent_open_loop: s.percent_open_loop,
            e_real_expected: s.real_expected,
            e_nominal_expected: s.nominal_expected,
        }
    }

    /// Row of a run that errored before producing a log.
    pub fn failed(scene_id: &str, method: Method, seed: u64) -> Self {
        BenchRow {
            scene_id: scene_id.to_string(),
            method,
            seed,
            success: false,
            planning_time_s: 0.0,
            execution_time_s: 0.0,
            percent_open_loop: 0.0,
            e_real_expected: None,
            e_nominal_expected: None,
        }
    }
}

/// Sample mean with the half-width of its 95% t-interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Present only when `n >= 2`.
    pub ci95: Option<f64>,
}

impl Stat {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci95 = (n >= 2).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        });
        Some(Stat { n, mean, ci95 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub runs: usize,
    /// Success as 0/1, so the mean is the success rate.
    pub success: Option<Stat>,
    pub planning_time_s: Option<Stat>,
    pub execution_time_s: Option<Stat>,
    pub percent_open_loop: Option<Stat>,
    pub e_real_expected: Option<Stat>,
    pub e_nominal_expected: Option<Stat>,
}

impl MethodAggregate {
    pub fn from_rows(method: Method, rows: &[BenchRow]) -> Self {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
        let col = |f: &dyn Fn(&BenchRow) -> Option<f64>| {
            Stat::of(&mine.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        MethodAggregate {
            method,
            runs: mine.len(),
            success: col(&|r| Some(if r.success { 1.0 } else { 0.0 })),
            planning_time_s: col(&|r| Some(r.planning_time_s)),
            execution_time_s: col(&|r| Some(r.execution_time_s)),
            percent_open_loop: col(&|r| Some(r.percent_open_loop)),
            e_real_expected: col(&|r| r.e_real_expected),
            e_nominal_expected: col(&|r| r.e_nominal_expected),
        }
    }
}

/// A run that failed with an error instead of finishing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub scene_id: String,
    pub method: Method,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seeds: Vec<u64>,
    pub scene_seed: u64,
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<MethodAggregate>,
    /// Hidden-world reads summed over all runs.
    pub audit: AuditCounts,
    pub errors: Vec<CellError>,
}

impl BenchReport {
    /// Aggregates for every method that appears in `rows`, in first-seen
    /// order.
    pub fn aggregate(rows: &[BenchRow]) -> Vec<MethodAggregate> {
        let mut methods: Vec<Method> = Vec::new();
        for r in rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        methods
            .into_iter()
            .map(|m| MethodAggregate::from_rows(m, rows))
            .collect()
    }

    pub fn aggregate_for(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown format {other:?} (csv or json)"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "scene_id",
    "method",
    "seed",
    "success",
    "planning_time_s",
    "execution_time_s",
    "percent_open_loop",
    "e_real_expected",
    "e_nominal_expected",
];

pub fn rows_to_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Config(format!("unexpected csv header {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn report_to_string(report: &BenchReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => rows_to_csv(&report.rows),
        ReportFormat::Json => {
            Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n")
        }
    }
}

/// Writes the report to `path`: the rows as CSV, or rows and aggregates as
/// JSON.
pub fn emit_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = report_to_string(report, format)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
