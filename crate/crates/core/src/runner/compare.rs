use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bench::BenchmarkRun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("runs cover different corpus subsets: {before} vs {after}")]
    CorpusMismatch { before: String, after: String },
    #[error("runs use different measurement bases: {0}")]
    MeasurementMismatch(String),
}

/// Signed `after - before` differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub co2_kg_per_inference: f64,
    pub latency_ms_per_inference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub before: BenchmarkRun,
    pub after: BenchmarkRun,
    /// `100 * (before - after) / before` on per-inference CO2e. Negative for
    /// regressions; `None` when `before` is zero and `after` is not.
    pub co2_reduction_pct: Option<f64>,
    pub metric_deltas: MetricDeltas,
}

pub fn co2_reduction_pct(before_kg: f64, after_kg: f64) -> Option<f64> {
    if before_kg > 0.0 {
        Some(100.0 * (before_kg - after_kg) / before_kg)
    } else if after_kg == before_kg {
        Some(0.0)
    } else {
        None
    }
}

pub fn compare(before: &BenchmarkRun, after: &BenchmarkRun) -> Result<ComparisonReport, CompareError> {
    if !before.subset.same_subset(&after.subset) {
        return Err(CompareError::CorpusMismatch {
            before: before.subset.to_string(),
            after: after.subset.to_string(),
        });
    }
    if before.energy.provider != after.energy.provider {
        return Err(CompareError::MeasurementMismatch(format!(
            "energy provider {} vs {}",
            before.energy.provider, after.energy.provider
        )));
    }
    if before.carbon.factor != after.carbon.factor {
        return Err(CompareError::MeasurementMismatch(format!(
            "emission factor `{}` vs `{}`",
            before.carbon.factor.to_row(),
            after.carbon.factor.to_row()
        )));
    }

    let (b, a) = (before.carbon.comparable_kg(), after.carbon.comparable_kg());
    let (bm, am) = (&before.metrics, &after.metrics);
    Ok(ComparisonReport {
        co2_reduction_pct: co2_reduction_pct(b, a),
        metric_deltas: MetricDeltas {
            macro_precision: am.macro_precision - bm.macro_precision,
            macro_recall: am.macro_recall - bm.macro_recall,
            macro_f1: am.macro_f1 - bm.macro_f1,
            accuracy: am.accuracy - bm.accuracy,
            co2_kg_per_inference: a - b,
            latency_ms_per_inference: after.latency_ms_per_inference - before.latency_ms_per_inference,
        },
        before: before.clone(),
        after: after.clone(),
    })
}
