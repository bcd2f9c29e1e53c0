use std::fmt;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, InferenceConfig};
use super::{Generation, ModelRunner, RunnerError};
use crate::carbon::{footprint, CarbonFootprint, EmissionFactor};
use crate::corpus::{build_prompt, split, Corpus, CorpusError};
use crate::energy::{Clock, EnergyError, EnergyReading, PowerSource, SystemClock};
use crate::metrics::{metrics, parse_label, ConfusionMatrix, Label, MetricsError, MetricsReport};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("model unreachable after {completed} of {total} inferences: {message}")]
    ModelUnreachable {
        completed: usize,
        total: usize,
        message: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Identifies exactly which examples a run evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetDescriptor {
    pub corpus_id: String,
    pub source_path: String,
    pub corpus_size: usize,
    pub subset_size: usize,
    /// Sampling seed; `None` when the whole corpus was used.
    pub seed: Option<u64>,
}

impl SubsetDescriptor {
    /// Same corpus content, size and sampling seed.
    pub fn same_subset(&self, other: &Self) -> bool {
        self.corpus_id == other.corpus_id
            && self.corpus_size == other.corpus_size
            && self.subset_size == other.subset_size
            && self.seed == other.seed
    }
}

impl fmt::Display for SubsetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}/{}",
            self.source_path,
            &self.corpus_id[..self.corpus_id.len().min(12)],
            self.subset_size,
            self.corpus_size
        )?;
        match self.seed {
            Some(seed) => write!(f, " seed={seed}"),
            None => f.write_str(" full"),
        }
    }
}

/// The examples to evaluate together with where they came from.
#[derive(Debug, Clone)]
pub struct Workload {
    pub corpus: Corpus,
    pub subset: SubsetDescriptor,
}

impl Workload {
    pub fn full(corpus: Corpus) -> Self {
        let subset = SubsetDescriptor {
            corpus_id: corpus.id(),
            source_path: corpus.source_path.clone(),
            corpus_size: corpus.len(),
            subset_size: corpus.len(),
            seed: None,
        };
        Self { corpus, subset }
    }

    pub fn sample(corpus: &Corpus, n: usize, seed: u64) -> Result<Self, CorpusError> {
        let picked = split(corpus, n, seed)?;
        let subset = SubsetDescriptor {
            corpus_id: corpus.id(),
            source_path: corpus.source_path.clone(),
            corpus_size: corpus.len(),
            subset_size: n,
            seed: Some(seed),
        };
        Ok(Self {
            corpus: picked,
            subset,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationInfo {
    pub bits: u32,
    /// Quantized bytes over fp32 bytes.
    pub footprint_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallClock {
    pub start_ms: u64,
    pub end_ms: u64,
}

/// One evaluated configuration: quality, energy and carbon over a fixed subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub label: String,
    pub runner: String,
    pub config: InferenceConfig,
    pub beam_size_honored: bool,
    pub subset: SubsetDescriptor,
    pub n_inferences: usize,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub unknown_predictions: u64,
    pub energy: EnergyReading,
    pub energy_source: String,
    pub carbon: CarbonFootprint,
    pub latency_ms_per_inference: f64,
    pub tokens_generated: Option<u64>,
    pub quantization: Option<QuantizationInfo>,
    pub wall_clock: WallClock,
}

/// Per-example audit row (`text,gold,predicted,raw_response`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub text: String,
    pub gold: Label,
    pub predicted: Label,
    pub raw_response: String,
}

impl PredictionRecord {
    pub fn to_csv(records: &[PredictionRecord]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["text", "gold", "predicted", "raw_response"])
            .expect("in-memory write");
        for r in records {
            w.write_record([r.text.as_str(), r.gold.as_str(), r.predicted.as_str(), r.raw_response.as_str()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub run: BenchmarkRun,
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Clone)]
pub struct RunOptions {
    /// Dispatch up to `batch_size` requests at once instead of one at a time.
    pub parallel: bool,
    pub clock: Arc<dyn Clock>,
    /// Report label; defaults to the model name.
    pub label: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallel: false,
            clock: Arc::new(SystemClock),
            label: None,
        }
    }
}

fn generate_all(
    model: &dyn ModelRunner,
    corpus: &Corpus,
    prompts: &[String],
    config: &InferenceConfig,
    parallel: bool,
) -> Result<Vec<Result<Generation, RunnerError>>, BenchError> {
    let total = corpus.len();
    let mut results = Vec::with_capacity(total);
    let chunk = if parallel { config.batch_size.max(1) as usize } else { 1 };

    for (start, batch) in corpus.examples.chunks(chunk).enumerate().map(|(i, b)| (i * chunk, b)) {
        let batch_results: Vec<Result<Generation, RunnerError>> = if batch.len() == 1 {
            vec![model.generate(&batch[0], &prompts[start], config)]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .enumerate()
                    .map(|(j, ex)| {
                        let prompt = &prompts[start + j];
                        s.spawn(move || model.generate(ex, prompt, config))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(RunnerError::Failed("runner thread panicked".into())))
                    })
                    .collect()
            })
        };
        for r in batch_results {
            if let Err(RunnerError::Unreachable(message)) = &r {
                return Err(BenchError::ModelUnreachable {
                    completed: results.len(),
                    total,
                    message: message.clone(),
                });
            }
            results.push(r);
        }
    }
    Ok(results)
}

/// Runs every example through `model` inside one energy measurement window.
pub fn run_benchmark(
    model: &dyn ModelRunner,
    workload: &Workload,
    config: &InferenceConfig,
    power: &PowerSource,
    factor: &EmissionFactor,
    options: &RunOptions,
) -> Result<BenchmarkOutcome, BenchError> {
    config.validate()?;
    let corpus = &workload.corpus;
    if corpus.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let prompts = corpus
        .examples
        .iter()
        .map(|ex| build_prompt(&ex.text))
        .collect::<Result<Vec<_>, _>>()?;

    let collector = power.start(options.clock.clone())?;
    let results = generate_all(model, corpus, &prompts, config, options.parallel)?;
    let measurement = collector.stop()?;

    let mut confusion = ConfusionMatrix::new();
    let mut predictions = Vec::with_capacity(results.len());
    let mut tokens: Option<u64> = None;
    for (ex, result) in corpus.examples.iter().zip(results) {
        let (predicted, raw) = match result {
            Ok(g) => {
                if let Some(n) = g.eval_count {
                    *tokens.get_or_insert(0) += n;
                }
                (parse_label(&g.text), g.text)
            }
            Err(e) => (Label::Unknown, e.to_string()),
        };
        confusion.record(ex.label, predicted)?;
        predictions.push(PredictionRecord {
            text: ex.text.clone(),
            gold: ex.label,
            predicted,
            raw_response: raw,
        });
    }

    let n = corpus.len();
    let mut carbon = footprint(&measurement.reading, factor);
    carbon.per_inference_kg = Some(carbon.kg_co2e / n as f64);
    let elapsed_ms = measurement.end_ms - measurement.start_ms;

    let run = BenchmarkRun {
        label: options.label.clone().unwrap_or_else(|| config.model_name.clone()),
        runner: model.kind().to_string(),
        config: config.clone(),
        beam_size_honored: model.honors_beam_size(),
        subset: workload.subset.clone(),
        n_inferences: n,
        metrics: metrics(&confusion)?,
        unknown_predictions: confusion.unknown_predictions(),
        confusion,
        energy: measurement.reading,
        energy_source: power.describe(),
        carbon,
        latency_ms_per_inference: elapsed_ms as f64 / n as f64,
        tokens_generated: tokens,
        quantization: model.quantization(),
        wall_clock: WallClock {
            start_ms: measurement.start_ms,
            end_ms: measurement.end_ms,
        },
    };
    Ok(BenchmarkOutcome { run, predictions })
}
