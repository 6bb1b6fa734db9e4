//! Run orchestration and the on-disk artifacts.
//!
//! An output directory receives:
//! - `records.csv`: one row per trial, scenarios concatenated in suite order;
//! - `summary.json`: per-scenario statistics and the row range of each scenario;
//! - `config.json`: the effective suite, enough to repeat the run;
//! - `manifest.json`: how the run was invoked.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use coilpose::montecarlo::{
    run_experiment, ExperimentConfig, ExperimentReport, MeanStd, SuccessRates, TrialRecord,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Suite;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

/// Column order of `records.csv`.
pub const CSV_COLUMNS: [&str; 19] = [
    "pose_index",
    "trial",
    "x_true",
    "y_true",
    "z_true",
    "nx_true",
    "ny_true",
    "nz_true",
    "x_est",
    "y_est",
    "z_est",
    "nx_est",
    "ny_est",
    "nz_est",
    "e_d_m",
    "e_alpha_deg",
    "n_used",
    "converged",
    "cost",
];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write to {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario `{label}` failed: {source}")]
    Experiment {
        label: String,
        source: coilpose::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub label: String,
    /// First data row of this scenario in `records.csv`, counting from 0.
    pub row_start: usize,
    /// One past the last data row.
    pub row_end: usize,
    pub n_records: usize,
    pub n_failed: usize,
    pub n_converged: usize,
    pub mean_n_used: f64,
    pub rates: SuccessRates,
    pub e_d_m: MeanStd,
    pub e_alpha_deg: MeanStd,
    pub cdf_e_d_m: Vec<(f64, f64)>,
    pub cdf_e_alpha_deg: Vec<(f64, f64)>,
    pub coverage: Vec<f64>,
    pub coverage_median: f64,
    pub outliers: Vec<usize>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub recipe: String,
    pub scenarios: Vec<ScenarioSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub recipe: String,
    /// Effective configuration written next to the outputs.
    pub config_path: PathBuf,
    /// Configuration file given on the command line, if any.
    pub source_config: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn summarize(
    report: &ExperimentReport,
    config: &ExperimentConfig,
    row_start: usize,
) -> ScenarioSummary {
    ScenarioSummary {
        label: report.label.clone(),
        row_start,
        row_end: row_start + report.records.len(),
        n_records: report.records.len(),
        n_failed: report.n_failed,
        n_converged: report.n_converged,
        mean_n_used: report.mean_n_used,
        rates: report.rates,
        e_d_m: report.e_d,
        e_alpha_deg: report.e_alpha,
        cdf_e_d_m: report.cdf_e_d.clone(),
        cdf_e_alpha_deg: report.cdf_e_alpha.clone(),
        coverage_median: median(&report.coverage),
        coverage: report.coverage.clone(),
        outliers: report.outliers.clone(),
        config: config.clone(),
    }
}

// `{:?}` keeps full precision and switches to exponent form for tiny values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn record_row(r: &TrialRecord) -> Vec<String> {
    let t = &r.truth;
    let ta = t.attitude();
    let mut row = vec![
        r.pose_index.to_string(),
        r.trial.to_string(),
        num(t.position.x),
        num(t.position.y),
        num(t.position.z),
        num(ta.x),
        num(ta.y),
        num(ta.z),
    ];
    match &r.estimate {
        Some(e) => {
            let ea = e.attitude();
            row.extend([e.position.x, e.position.y, e.position.z, ea.x, ea.y, ea.z].map(num));
        }
        None => row.extend(std::iter::repeat_n(String::new(), 6)),
    }
    row.extend([
        opt(r.e_d),
        opt(r.e_alpha),
        r.n_used.to_string(),
        r.converged.to_string(),
        opt(r.cost),
    ]);
    row
}

/// Serializes trial records as CSV with the fixed header.
pub fn write_records<W: Write>(w: W, records: &[TrialRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in records {
        out.write_record(record_row(r))?;
    }
    out.flush()?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), OutputError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| OutputError::Unwritable { path, source })
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("in-memory JSON serialization");
    s.push(b'\n');
    s
}

/// Runs every scenario of `suite` and writes all artifacts into `out_dir`.
///
/// `progress` is called after each scenario with its summary.
pub fn run_suite(
    suite: &Suite,
    out_dir: &Path,
    source_config: Option<&Path>,
    mut progress: impl FnMut(&ScenarioSummary),
) -> Result<Summary, OutputError> {
    fs::create_dir_all(out_dir).map_err(|source| OutputError::Unwritable {
        path: out_dir.to_path_buf(),
        source,
    })?;
    // Fail on an unwritable directory before spending time on the runs.
    write_file(out_dir, CONFIG_FILE, &to_json(suite))?;

    let mut records = Vec::new();
    let mut scenarios = Vec::new();
    for cfg in &suite.scenarios {
        let report = run_experiment(cfg).map_err(|source| OutputError::Experiment {
            label: cfg.label.clone(),
            source,
        })?;
        let s = summarize(&report, cfg, records.len());
        progress(&s);
        scenarios.push(s);
        records.extend(report.records);
    }

    let mut csv_bytes = Vec::new();
    write_records(&mut csv_bytes, &records).expect("in-memory CSV serialization");
    write_file(out_dir, RECORDS_FILE, &csv_bytes)?;

    let summary = Summary {
        recipe: suite.recipe.clone(),
        scenarios,
    };
    write_file(out_dir, SUMMARY_FILE, &to_json(&summary))?;

    let manifest = RunManifest {
        recipe: suite.recipe.clone(),
        config_path: out_dir.join(CONFIG_FILE),
        source_config: source_config.map(Path::to_path_buf),
        output_dir: out_dir.to_path_buf(),
        master_seed: suite.scenarios.first().map_or(0, |c| c.master_seed),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    write_file(out_dir, MANIFEST_FILE, &to_json(&manifest))?;
    Ok(summary)
}
