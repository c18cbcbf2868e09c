//! Report bundles: one JSON and two CSV files per suite, a summary and run metadata.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mixlab_core::report::SuiteReport;
use serde::{Deserialize, Serialize};

use crate::plan::VerificationPlan;
use crate::{CliError, Verification};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: bool,
    pub seed: u64,
    pub conventions: BTreeMap<String, String>,
    pub suites: Vec<SuiteSummary>,
}

impl Summary {
    pub fn of(reports: &[SuiteReport], seed: u64, conventions: BTreeMap<String, String>) -> Self {
        let suites = reports
            .iter()
            .map(|r| SuiteSummary {
                suite: r.suite.clone(),
                passed: r.passed,
                checks: r.checks.len(),
                failures: r.failures().map(|c| c.name.clone()).collect(),
            })
            .collect();
        Self { passed: reports.iter().all(|r| r.passed), seed, conventions, suites }
    }
}

/// Non-deterministic facts about a run, kept apart from the reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub started_unix_secs: u64,
    pub finished_unix_secs: u64,
    pub plan: VerificationPlan,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Writes `<suite>.json`, `<suite>.csv` (checks) and `<suite>_rows.csv` (residual rows).
pub fn write_suite(dir: &Path, report: &SuiteReport) -> Result<Vec<PathBuf>, CliError> {
    let json = dir.join(format!("{}.json", report.suite));
    write_json(&json, report)?;
    let checks = dir.join(format!("{}.csv", report.suite));
    report.write_checks_csv(BufWriter::new(File::create(&checks)?))?;
    let rows = dir.join(format!("{}_rows.csv", report.suite));
    report.write_rows_csv(BufWriter::new(File::create(&rows)?))?;
    Ok(vec![json, checks, rows])
}

/// Writes the full bundle of a verification run into `dir`.
pub fn write_bundle(dir: &Path, plan: &VerificationPlan, v: &Verification, started: u64) -> Result<Summary, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut conventions = BTreeMap::new();
    if let Some(a) = &v.adjudication {
        write_json(&dir.join("adjudication.json"), a)?;
        write_suite(dir, &a.report)?;
        conventions = a.report.conventions.clone();
    }
    for r in &v.reports {
        write_suite(dir, r)?;
    }
    let summary = Summary::of(&v.reports, plan.seed, conventions);
    write_json(&dir.join("summary.json"), &summary)?;
    let meta = Metadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_secs: started,
        finished_unix_secs: unix_now(),
        plan: plan.clone(),
    };
    write_json(&dir.join("metadata.json"), &meta)?;
    Ok(summary)
}

/// Reads every suite report (`*.json` other than the summary, metadata and adjudication files) in `dir`.
pub fn read_reports(dir: &Path) -> Result<Vec<SuiteReport>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Parse(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            !matches!(stem, "summary" | "metadata" | "adjudication" | "report" | "conservation")
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let r: SuiteReport =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
        out.push(r);
    }
    if out.is_empty() {
        return Err(CliError::Parse(format!("no suite reports in {}", dir.display())));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Combines suite reports into `report.json` or `report.csv` in `out`.
pub fn write_combined(reports: &[SuiteReport], format: Format, out: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)?;
    match format {
        Format::Json => {
            let path = out.join("report.json");
            let seed = reports.first().map_or(0, |r| r.seed);
            #[derive(Serialize)]
            struct Combined<'a> {
                summary: Summary,
                reports: &'a [SuiteReport],
            }
            write_json(&path, &Combined { summary: Summary::of(reports, seed, BTreeMap::new()), reports })?;
            Ok(path)
        }
        Format::Csv => {
            let path = out.join("report.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
            w.write_record(["suite", "seed", "check", "value", "tolerance", "passed", "note"])?;
            for r in reports {
                for c in &r.checks {
                    w.write_record([
                        r.suite.as_str(),
                        &r.seed.to_string(),
                        &c.name,
                        &format!("{:e}", c.value),
                        &format!("{:e}", c.tolerance),
                        if c.passed { "true" } else { "false" },
                        c.note.as_deref().unwrap_or(""),
                    ])?;
                }
            }
            w.flush()?;
            Ok(path)
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
