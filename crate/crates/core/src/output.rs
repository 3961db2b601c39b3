//! CSV result files and the run manifest.

use crate::metrics::{MetricsReport, REPORTED_PERCENTILES};
use crate::runner::RepetitionOutput;
use crate::scenario::AccessScheme;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RATES_FILE: &str = "rates.csv";
pub const PERCENTILES_FILE: &str = "percentiles.csv";
pub const OCCUPANCY_FILE: &str = "occupancy.csv";
pub const LOAD_FILE: &str = "load.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Marker written where a ratio is undefined.
pub const UNDEFINED: &str = "NA";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Nine significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| UNDEFINED.to_string(), fmt_float)
}

fn writer(path: &Path) -> Result<csv::Writer<File>, OutputError> {
    csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn runs_in_order<'a>(
    schemes: &'a [AccessScheme],
    outputs: &'a [RepetitionOutput],
) -> impl Iterator<Item = &'a crate::runner::SchemeRun> + 'a {
    schemes
        .iter()
        .flat_map(move |s| outputs.iter().flat_map(move |o| o.runs.iter().filter(move |r| r.scheme == *s)))
}

pub fn write_rates(path: &Path, schemes: &[AccessScheme], outputs: &[RepetitionOutput]) -> Result<(), OutputError> {
    let rows = runs_in_order(schemes, outputs).flat_map(|run| {
        run.ues.iter().map(move |u| {
            vec![
                run.scheme.to_string(),
                run.repetition.to_string(),
                u.operator.to_string(),
                u.ue_id.to_string(),
                fmt_float(u.rate_bps),
                u.sinr_db.map(fmt_float).unwrap_or_default(),
                u.serving.map(|(_, c)| c.to_string()).unwrap_or_default(),
                u.serving.map(|(b, _)| b.to_string()).unwrap_or_default(),
            ]
        })
    });
    write_rows(
        path,
        &["scheme", "repetition", "operator", "ue_id", "rate_bps", "sinr_db", "carrier", "bs_id"],
        rows,
    )
}

pub fn write_percentiles(path: &Path, schemes: &[AccessScheme], report: &MetricsReport) -> Result<(), OutputError> {
    let mut rows = Vec::new();
    for &s in schemes {
        let Some(stats) = report.scheme(s) else { continue };
        for p in REPORTED_PERCENTILES {
            rows.push(vec![
                s.to_string(),
                format!("{p}"),
                fmt_opt(stats.percentile(p).ok()),
                fmt_opt(report.ratio_vs_licensed(s, p)),
            ]);
        }
    }
    write_rows(path, &["scheme", "p", "value_bps", "ratio_vs_licensed"], rows)
}

pub fn write_occupancy(path: &Path, schemes: &[AccessScheme], outputs: &[RepetitionOutput]) -> Result<(), OutputError> {
    let rows = runs_in_order(schemes, outputs).flat_map(|run| {
        run.trace.iter().enumerate().map(move |(step, f)| {
            vec![
                run.scheme.to_string(),
                run.repetition.to_string(),
                step.to_string(),
                fmt_float(*f),
            ]
        })
    });
    write_rows(path, &["scheme", "repetition", "step", "frac_c_low"], rows)
}

pub fn write_load(path: &Path, schemes: &[AccessScheme], outputs: &[RepetitionOutput]) -> Result<(), OutputError> {
    let rows = runs_in_order(schemes, outputs).flat_map(|run| {
        run.bs_load.iter().enumerate().map(move |(bs, n)| {
            vec![
                run.scheme.to_string(),
                run.repetition.to_string(),
                bs.to_string(),
                n.to_string(),
            ]
        })
    });
    write_rows(path, &["scheme", "repetition", "bs_id", "ue_count"], rows)
}

/// Write the four per-run CSV files into `dir`.
pub fn write_run_outputs(
    dir: &Path,
    schemes: &[AccessScheme],
    outputs: &[RepetitionOutput],
    report: &MetricsReport,
) -> Result<(), OutputError> {
    write_rates(&dir.join(RATES_FILE), schemes, outputs)?;
    write_percentiles(&dir.join(PERCENTILES_FILE), schemes, report)?;
    write_occupancy(&dir.join(OCCUPANCY_FILE), schemes, outputs)?;
    write_load(&dir.join(LOAD_FILE), schemes, outputs)
}

/// One line of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub scheme: AccessScheme,
    pub statistic: String,
    pub value_bps: Option<f64>,
    pub ratio_vs_licensed: Option<f64>,
}

/// Summary rows (5th/50th/95th percentile and mean) of one sweep point.
pub fn sweep_rows(axis: &str, value: &str, schemes: &[AccessScheme], report: &MetricsReport) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &s in schemes {
        let Some(stats) = report.scheme(s) else { continue };
        for p in REPORTED_PERCENTILES {
            rows.push(SweepRow {
                axis: axis.to_string(),
                value: value.to_string(),
                scheme: s,
                statistic: format!("p{p}"),
                value_bps: stats.percentile(p).ok(),
                ratio_vs_licensed: report.ratio_vs_licensed(s, p),
            });
        }
        let base = report.scheme(AccessScheme::Licensed).and_then(|b| b.mean_rate());
        let mean = stats.mean_rate();
        rows.push(SweepRow {
            axis: axis.to_string(),
            value: value.to_string(),
            scheme: s,
            statistic: "mean".to_string(),
            value_bps: mean,
            ratio_vs_licensed: mean.zip(base).and_then(|(m, b)| crate::metrics::ratio_vs_baseline(m, b)),
        });
    }
    rows
}

pub fn write_sweep_summary(path: &Path, rows: &[SweepRow]) -> Result<(), OutputError> {
    let rows = rows.iter().map(|r| {
        vec![
            r.axis.clone(),
            r.value.clone(),
            r.scheme.to_string(),
            r.statistic.clone(),
            fmt_opt(r.value_bps),
            fmt_opt(r.ratio_vs_licensed),
        ]
    });
    write_rows(
        path,
        &["axis", "value", "scheme", "statistic", "value_bps", "ratio_vs_licensed"],
        rows,
    )
}

/// Sweep part of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<String>,
}

/// Structured record of a run; enough to regenerate its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub schemes: Vec<AccessScheme>,
    pub seed: u64,
    pub repetitions: usize,
    pub threads: Option<usize>,
    pub strict_convergence: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepSpec>,
    pub config_fingerprint: String,
    /// Resolved scenario as TOML.
    pub config: String,
    pub output_dir: PathBuf,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    #[serde(default)]
    pub nonconverged: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        let path = dir.join(MANIFEST_FILE);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(|source| OutputError::Json {
            path: path.display().to_string(),
            source,
        })?;
        writeln!(w).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))
    }

    pub fn read(path: &Path) -> Result<RunManifest, OutputError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| OutputError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}
