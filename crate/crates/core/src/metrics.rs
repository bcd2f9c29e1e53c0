//! Three-class sentiment evaluation: label parsing, confusion counts and
//! precision/recall/F1/accuracy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no evaluation pairs")]
    EmptyEvaluation,
    #[error("gold label is unknown at pair {0}")]
    UnknownGold(usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Neutral,
    Unknown,
}

impl Label {
    /// Real classes in tie-break and matrix order.
    pub const CLASSES: [Label; 3] = [Label::Positive, Label::Negative, Label::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Neutral => "neutral",
            Label::Unknown => "unknown",
        }
    }

    /// Matrix column; `Unknown` is column 3.
    pub fn index(self) -> usize {
        match self {
            Label::Positive => 0,
            Label::Negative => 1,
            Label::Neutral => 2,
            Label::Unknown => 3,
        }
    }

    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    /// Exact (case-insensitive) class name; use [`parse_label`] for free text.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            "neutral" => Ok(Label::Neutral),
            "unknown" => Ok(Label::Unknown),
            other => Err(format!("unrecognised label {other:?}")),
        }
    }
}

/// Picks whichever class name occurs first in a model response, ignoring case.
pub fn parse_label(response_text: &str) -> Label {
    let haystack = response_text.to_ascii_lowercase();
    Label::CLASSES
        .iter()
        .filter_map(|&label| haystack.find(label.as_str()).map(|pos| (pos, label)))
        .min_by_key(|&(pos, _)| pos)
        .map_or(Label::Unknown, |(_, label)| label)
}

/// Gold class (rows) by predicted class including `unknown` (columns).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 3],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, gold: Label, predicted: Label) -> Result<(), MetricsError> {
        if !gold.is_known() {
            return Err(MetricsError::UnknownGold(self.total() as usize));
        }
        self.counts[gold.index()][predicted.index()] += 1;
        Ok(())
    }

    pub fn get(&self, gold: Label, predicted: Label) -> u64 {
        if gold.is_known() {
            self.counts[gold.index()][predicted.index()]
        } else {
            0
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|c| self.counts[c][c]).sum()
    }

    pub fn unknown_predictions(&self) -> u64 {
        self.counts.iter().map(|row| row[3]).sum()
    }

    /// Counts are additive, so partial matrices from parallel workers can be merged.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, add) in row.iter_mut().zip(other_row) {
                *cell += add;
            }
        }
    }
}

pub fn confusion(pairs: &[(Label, Label)]) -> Result<ConfusionMatrix, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let mut cm = ConfusionMatrix::new();
    for (i, &(gold, predicted)) in pairs.iter().enumerate() {
        if !gold.is_known() {
            return Err(MetricsError::UnknownGold(i));
        }
        cm.record(gold, predicted)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = Label::CLASSES
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = cm.counts[c][c];
            // unknown predictions sit in column 3: they count against recall only
            let predicted_as_c: u64 = (0..3).map(|g| cm.counts[g][c]).sum();
            let support: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted_as_c);
            let recall = ratio(tp, support);
            ClassMetrics {
                label,
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
            }
        })
        .collect();

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / per_class.len() as f64;
    Ok(MetricsReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: ratio(cm.correct(), total),
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn parse_label_examples() {
        assert_eq!(parse_label("Negative — afternoon selloff as usual will be brutal"), Negative);
        assert_eq!(parse_label("NEUTRAL: purely factual information"), Neutral);
        assert_eq!(parse_label("I cannot determine this."), Unknown);
        assert_eq!(parse_label(""), Unknown);
        // first occurrence wins, regardless of class order
        assert_eq!(parse_label("Neutral, not positive"), Neutral);
        assert_eq!(parse_label("Predicted: Negative\nReasoning: no positive cues"), Negative);
        assert_eq!(parse_label("**Positive** [Reasoning]"), Positive);
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[(Positive, Positive)]).unwrap();
        assert_eq!(cm.get(Positive, Positive), 1);
        assert_eq!(metrics(&cm).unwrap().accuracy, 1.0);

        let cm = confusion(&[(Positive, Negative)]).unwrap();
        assert_eq!(cm.get(Positive, Negative), 1);
        assert_eq!(cm.correct(), 0);

        assert_eq!(confusion(&[]), Err(MetricsError::EmptyEvaluation));
        assert_eq!(
            confusion(&[(Neutral, Neutral), (Unknown, Neutral)]),
            Err(MetricsError::UnknownGold(1))
        );
    }

    #[test]
    fn diagonal_matrix_is_perfect() {
        let cm = confusion(&[(Positive, Positive), (Negative, Negative), (Neutral, Neutral), (Neutral, Neutral)]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.macro_precision, 1.0);
        assert_eq!(m.macro_recall, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn single_class_f1_with_perfect_precision() {
        // 84 of 100 positives found, no false positives: P = 1.00, R = 0.84
        let mut pairs = vec![(Positive, Positive); 84];
        pairs.extend(vec![(Positive, Unknown); 16]);
        let m = metrics(&confusion(&pairs).unwrap()).unwrap();
        let pos = m.per_class[0];
        assert_eq!(pos.precision, 1.0);
        assert_eq!(pos.recall, 0.84);
        assert!((pos.f1 - 0.913).abs() < 1e-3);
    }

    #[test]
    fn unknown_predictions_only_hurt_recall() {
        let cm = confusion(&[(Negative, Unknown), (Negative, Negative)]).unwrap();
        let m = metrics(&cm).unwrap();
        let neg = m.per_class[1];
        assert_eq!(neg.precision, 1.0);
        assert_eq!(neg.recall, 0.5);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(cm.unknown_predictions(), 1);
    }

    #[test]
    fn empty_matrix_rejected() {
        assert_eq!(metrics(&ConfusionMatrix::new()), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = confusion(&[(Positive, Positive)]).unwrap();
        let b = confusion(&[(Neutral, Unknown), (Positive, Positive)]).unwrap();
        a.merge(&b);
        assert_eq!(a.total(), 3);
        assert_eq!(a.get(Positive, Positive), 2);
    }
}
