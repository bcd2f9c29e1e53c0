//! Labeled sentiment dataset loading, subsampling and prompt rendering.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::Label;

/// Canonical prompt; `{content}` is replaced by the text under assessment.
pub const PROMPT_TEMPLATE: &str = include_str!("../assets/sentiment_prompt.txt");
pub const PROMPT_PLACEHOLDER: &str = "{content}";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing header `text,label` (found `{0}`)")]
    MissingHeader(String),
    #[error("row {row}: bad label {label:?} (expected positive, negative or neutral)")]
    BadLabel { row: usize, label: String },
    #[error("row {row}: empty text")]
    EmptyText { row: usize },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("text must not be empty")]
    EmptyPromptText,
    #[error("requested {requested} examples from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub source_path: String,
}

impl Corpus {
    pub fn new(examples: Vec<Example>, source_path: impl Into<String>) -> Self {
        Self {
            examples,
            source_path: source_path.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Content hash over every (text, label) pair in order; independent of the path.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        for ex in &self.examples {
            hasher.update(ex.text.as_bytes());
            hasher.update([0x1f]);
            hasher.update(ex.label.as_str().as_bytes());
            hasher.update([0x1e]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn parse_csv(text: &str, source_path: impl Into<String>) -> Result<Self, CorpusError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| CorpusError::MissingHeader(e.to_string()))?
            .clone();
        let names: Vec<String> = headers
            .iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
            .collect();
        if names != ["text", "label"] {
            return Err(CorpusError::MissingHeader(names.join(",")));
        }

        let mut examples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| CorpusError::Malformed {
                row,
                message: e.to_string(),
            })?;
            let text = record.get(0).unwrap_or_default();
            let raw_label = record.get(1).unwrap_or_default();
            if text.trim().is_empty() {
                return Err(CorpusError::EmptyText { row });
            }
            let label = match raw_label.parse::<Label>() {
                Ok(l) if l.is_known() => l,
                _ => {
                    return Err(CorpusError::BadLabel {
                        row,
                        label: raw_label.to_string(),
                    })
                }
            };
            examples.push(Example {
                text: text.to_string(),
                label,
            });
        }
        Ok(Self::new(examples, source_path))
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        // writing into a Vec cannot fail
        writer.write_record(["text", "label"]).expect("in-memory write");
        for ex in &self.examples {
            writer
                .write_record([ex.text.as_str(), ex.label.as_str()])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

pub fn load_csv(path: &Path) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::parse_csv(&text, path.display().to_string())
}

pub fn build_prompt(text: &str) -> Result<String, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyPromptText);
    }
    Ok(PROMPT_TEMPLATE.replacen(PROMPT_PLACEHOLDER, text, 1))
}

/// Seeded subsample of `n` examples, kept in file order.
pub fn split(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if n == 0 || n > corpus.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, corpus.len(), n).into_vec();
    picked.sort_unstable();
    Ok(Corpus::new(
        picked.into_iter().map(|i| corpus.examples[i].clone()).collect(),
        corpus.source_path.clone(),
    ))
}
