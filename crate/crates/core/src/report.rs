//! Report documents: canonical JSON and a before/after markdown table.
//!
//! Values are stored at full precision; rounding happens only when the
//! markdown table is rendered.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{BenchmarkRun, ComparisonReport};

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = concat!("greenbench ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0:?}")]
    SchemaVersion(String),
    #[error("provenance field `{0}` is empty")]
    MissingProvenance(&'static str),
    #[error("comparison {0} references a run that is not in the document")]
    DanglingComparison(usize),
}

/// Where the numbers in a document came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub energy_providers: Vec<String>,
    pub factor_file: String,
    pub factor_rows: Vec<String>,
    pub corpus_subsets: Vec<String>,
    pub tool_version: String,
}

impl Provenance {
    /// Collects provenance from the runs themselves.
    pub fn from_runs<'a>(runs: impl IntoIterator<Item = &'a BenchmarkRun>, factor_file: &str) -> Self {
        let mut p = Provenance {
            factor_file: factor_file.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            ..Provenance::default()
        };
        for run in runs {
            push_unique(&mut p.energy_providers, run.energy_source.clone());
            push_unique(&mut p.factor_rows, run.carbon.factor.to_row());
            push_unique(&mut p.corpus_subsets, run.subset.to_string());
        }
        p
    }

    /// Union of two provenance records; `self` wins on scalar fields.
    pub fn merge(&mut self, other: &Provenance) {
        for v in &other.energy_providers {
            push_unique(&mut self.energy_providers, v.clone());
        }
        for v in &other.factor_rows {
            push_unique(&mut self.factor_rows, v.clone());
        }
        for v in &other.corpus_subsets {
            push_unique(&mut self.corpus_subsets, v.clone());
        }
        if self.factor_file.is_empty() {
            self.factor_file = other.factor_file.clone();
        } else if !other.factor_file.is_empty() && other.factor_file != self.factor_file {
            self.factor_file = format!("{}; {}", self.factor_file, other.factor_file);
        }
        if self.tool_version.is_empty() {
            self.tool_version = other.tool_version.clone();
        }
    }
}

fn push_unique(v: &mut Vec<String>, item: String) {
    if !v.contains(&item) {
        v.push(item);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub runs: Vec<BenchmarkRun>,
    pub comparisons: Vec<ComparisonReport>,
    pub provenance: Provenance,
}

impl ReportDocument {
    pub fn new(runs: Vec<BenchmarkRun>, comparisons: Vec<ComparisonReport>, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            runs,
            comparisons,
            provenance,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ReportError::SchemaVersion(self.schema_version.clone()));
        }
        let p = &self.provenance;
        if p.tool_version.is_empty() {
            return Err(ReportError::MissingProvenance("tool_version"));
        }
        if !self.runs.is_empty() {
            if p.factor_file.is_empty() {
                return Err(ReportError::MissingProvenance("factor_file"));
            }
            if p.energy_providers.is_empty() {
                return Err(ReportError::MissingProvenance("energy_providers"));
            }
            if p.factor_rows.is_empty() {
                return Err(ReportError::MissingProvenance("factor_rows"));
            }
            if p.corpus_subsets.is_empty() {
                return Err(ReportError::MissingProvenance("corpus_subsets"));
            }
        }
        for (i, c) in self.comparisons.iter().enumerate() {
            if !self.runs.contains(&c.before) || !self.runs.contains(&c.after) {
                return Err(ReportError::DanglingComparison(i));
            }
        }
        Ok(())
    }
}

/// Pretty-printed JSON with struct-order keys, shortest round-trip floats and a trailing newline.
pub fn emit_json(doc: &ReportDocument) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(doc).expect("report serialization is infallible");
    out.push(b'\n');
    out
}

pub fn parse_json(bytes: &[u8]) -> Result<ReportDocument, ReportError> {
    let doc: ReportDocument = serde_json::from_slice(bytes)?;
    doc.validate()?;
    Ok(doc)
}

const HEADER: &str = "| Model | Precision | Recall | F1 | Accuracy | CO₂ (kg) |\n|---|---|---|---|---|---|\n";

/// Formatting rounds exact ties to even; metrics get 2 decimals, CO2 gets 3.
fn row(out: &mut String, run: &BenchmarkRun) {
    let m = &run.metrics;
    let _ = writeln!(
        out,
        "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.3} |",
        run.label.replace('|', "\\|"),
        m.macro_precision,
        m.macro_recall,
        m.macro_f1,
        m.accuracy,
        run.carbon.comparable_kg()
    );
}

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "| **{title}** | | | | | |");
}

/// Markdown summary grouped into before and after sections. CO2 is per inference.
pub fn emit_markdown_table(doc: &ReportDocument) -> String {
    let mut out = String::from(HEADER);
    if doc.comparisons.is_empty() {
        for run in &doc.runs {
            row(&mut out, run);
        }
        return out;
    }

    section(&mut out, "Before Optimization");
    for c in &doc.comparisons {
        row(&mut out, &c.before);
    }
    section(&mut out, "After Optimization");
    for c in &doc.comparisons {
        row(&mut out, &c.after);
    }
    let others: Vec<&BenchmarkRun> = doc
        .runs
        .iter()
        .filter(|r| !doc.comparisons.iter().any(|c| &c.before == *r || &c.after == *r))
        .collect();
    if !others.is_empty() {
        section(&mut out, "Other Runs");
        for run in others {
            row(&mut out, run);
        }
    }

    out.push_str("\n| Model | CO₂ reduction (%) | ΔF1 | ΔAccuracy |\n|---|---|---|---|\n");
    for c in &doc.comparisons {
        let pct = c
            .co2_reduction_pct
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.1}"));
        let _ = writeln!(
            out,
            "| {} → {} | {} | {:+.2} | {:+.2} |",
            c.before.label.replace('|', "\\|"),
            c.after.label.replace('|', "\\|"),
            pct,
            c.metric_deltas.macro_f1,
            c.metric_deltas.accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document() {
        let doc = ReportDocument::new(vec![], vec![], Provenance {
            tool_version: TOOL_VERSION.into(),
            ..Provenance::default()
        });
        let json = emit_json(&doc);
        let text = std::str::from_utf8(&json).unwrap();
        assert!(text.contains("\"runs\": []"));
        assert!(text.contains("\"comparisons\": []"));
        assert!(text.ends_with("}\n"));
        assert_eq!(parse_json(&json).unwrap(), doc);
        assert_eq!(emit_markdown_table(&doc), HEADER);
    }

    #[test]
    fn rejects_bad_documents() {
        let mut doc = ReportDocument::new(vec![], vec![], Provenance::default());
        assert!(matches!(doc.validate(), Err(ReportError::MissingProvenance("tool_version"))));
        doc.provenance.tool_version = "x".into();
        doc.schema_version = "0".into();
        assert!(matches!(doc.validate(), Err(ReportError::SchemaVersion(_))));
        assert!(parse_json(b"not json").is_err());
    }

    #[test]
    fn presentation_rounding() {
        assert_eq!(format!("{:.2}", 0.9134), "0.91");
        assert_eq!(format!("{:.2}", 0.125), "0.12");
        assert_eq!(format!("{:.2}", 0.375), "0.38");
        assert_eq!(format!("{:.3}", 0.007), "0.007");
    }
}
