use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adversary::AdversaryReport;
use super::bounds::BoundsReport;
use super::rates::{ConvergenceTable, RateReport};
use super::spec::ExperimentSpec;
use super::verify::VerificationReport;
use super::Outcome;
use crate::error::{Error, Result};

/// Version of the JSON document layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Tabular view of a result for CSV output.
pub trait Emit: Serialize {
    fn csv_header(&self) -> Vec<String>;
    fn csv_records(&self) -> Vec<Vec<String>>;
}

/// Shortest round-trip scientific notation, independent of locale.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

impl Emit for ConvergenceTable {
    fn csv_header(&self) -> Vec<String> {
        header(&[
            "target_cost",
            "cost",
            "cells",
            "error_mean",
            "error_rms",
            "error_max",
            "trials",
        ])
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.target_cost.to_string(),
                    r.cost.to_string(),
                    r.cells.to_string(),
                    num(r.error_mean),
                    num(r.error_rms),
                    num(r.error_max),
                    r.trials.to_string(),
                ]
            })
            .collect()
    }
}

impl Emit for RateReport {
    fn csv_header(&self) -> Vec<String> {
        self.table.csv_header()
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.table.csv_records()
    }
}

impl Emit for VerificationReport {
    fn csv_header(&self) -> Vec<String> {
        header(&["check", "value", "tolerance", "passed"])
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.check.clone(),
                    num(r.value),
                    num(r.tolerance),
                    r.passed.to_string(),
                ]
            })
            .collect()
    }
}

impl Emit for AdversaryReport {
    fn csv_header(&self) -> Vec<String> {
        let k = self.trials.first().map_or(0, |t| t.integral_errors.len());
        let mut cols = header(&["trial", "mean", "estimate", "abs_error", "cost"]);
        cols.extend((0..k).map(|j| format!("integral_error_{j}")));
        cols
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.trials
            .iter()
            .map(|t| {
                let mut rec = vec![
                    t.trial.to_string(),
                    num(t.mean),
                    num(t.estimate),
                    num(t.abs_error),
                    t.cost.to_string(),
                ];
                rec.extend(t.integral_errors.iter().map(|&e| num(e)));
                rec
            })
            .collect()
    }
}

impl Emit for BoundsReport {
    fn csv_header(&self) -> Vec<String> {
        header(&["setting", "kn", "eps1", "formula", "queries"])
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.setting.to_string(),
            self.kn.to_string(),
            num(self.eps1),
            self.formula.clone(),
            self.queries.to_string(),
        ]]
    }
}

impl Emit for Outcome {
    fn csv_header(&self) -> Vec<String> {
        match self {
            Outcome::Verification(r) => r.csv_header(),
            Outcome::Rates(r) => r.csv_header(),
            Outcome::Adversary(r) => r.csv_header(),
            Outcome::Bounds(r) => r.csv_header(),
        }
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        match self {
            Outcome::Verification(r) => r.csv_records(),
            Outcome::Rates(r) => r.csv_records(),
            Outcome::Adversary(r) => r.csv_records(),
            Outcome::Bounds(r) => r.csv_records(),
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<&'a ExperimentSpec>,
    result: &'a T,
}

/// Renders `results` as CSV (header plus one record per row) or as a JSON
/// document `{schema_version, spec, result}`.
pub fn emit_string<T: Emit>(
    results: &T,
    spec: Option<&ExperimentSpec>,
    format: OutputFormat,
) -> Result<String> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(results.csv_header())?;
            for rec in results.csv_records() {
                w.write_record(rec)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::invalid(format!("CSV buffer: {e}")))?;
            Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
        }
        OutputFormat::Json => {
            let doc = Document {
                schema_version: SCHEMA_VERSION,
                spec,
                result: results,
            };
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            Ok(text)
        }
    }
}

/// Writes [`emit_string`] output to `path`.
pub fn emit<T: Emit>(
    results: &T,
    spec: Option<&ExperimentSpec>,
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let text = emit_string(results, spec, format)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
