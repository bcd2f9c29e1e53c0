//! Benchmark orchestration: model runners, runs and before/after comparisons.

mod bench;
mod compare;
pub mod config;
pub mod http;
pub mod toy;

use thiserror::Error;

pub use bench::{
    run_benchmark, BenchError, BenchmarkOutcome, BenchmarkRun, PredictionRecord, QuantizationInfo,
    RunOptions, SubsetDescriptor, WallClock, Workload,
};
pub use compare::{compare, CompareError, ComparisonReport, MetricDeltas};
pub use config::{ConfigOverrides, InferenceConfig};
pub use http::{http_generate, GenerateResponse, HttpClient, HttpGenerateError};
pub use toy::{separable_corpus, toy_classifier_predict, toy_classifier_train, ToyClassifier, ToyError};

use crate::corpus::Example;
use crate::quant::{memory_footprint, TensorRef};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Generation {
    pub text: String,
    pub eval_count: Option<u64>,
    pub eval_duration_ns: Option<u64>,
}

impl Generation {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    /// The model cannot be reached at all; the run aborts.
    #[error("model unreachable: {0}")]
    Unreachable(String),
    /// This one generation failed; recorded as an unknown prediction.
    #[error("generation failed: {0}")]
    Failed(String),
}

/// Anything that turns a prompt into a response.
pub trait ModelRunner: Sync {
    /// Short runner kind recorded in reports (`mock`, `toy`, `http`).
    fn kind(&self) -> &'static str;

    fn generate(&self, example: &Example, prompt: &str, config: &InferenceConfig) -> Result<Generation, RunnerError>;

    /// Whether `beam_size` actually reaches the model.
    fn honors_beam_size(&self) -> bool {
        false
    }

    /// Bit width and footprint ratio when running quantized weights.
    fn quantization(&self) -> Option<QuantizationInfo> {
        None
    }
}

/// Canned responses for tests and dry runs.
#[derive(Debug, Clone, PartialEq)]
pub enum MockRunner {
    /// Answers with the gold label, capitalized.
    Oracle,
    /// Always answers with this text.
    Fixed(String),
}

impl ModelRunner for MockRunner {
    fn kind(&self) -> &'static str {
        "mock"
    }

    fn generate(&self, example: &Example, _prompt: &str, _config: &InferenceConfig) -> Result<Generation, RunnerError> {
        Ok(match self {
            MockRunner::Oracle => {
                let name = example.label.as_str();
                Generation::text(format!("{}{} [mock]", name[..1].to_uppercase(), &name[1..]))
            }
            MockRunner::Fixed(text) => Generation::text(text.clone()),
        })
    }
}

/// The toy classifier behind the runner interface. Reads the raw text, not the prompt.
#[derive(Debug, Clone)]
pub struct ToyRunner {
    classifier: ToyClassifier,
    quantization: Option<QuantizationInfo>,
}

impl ToyRunner {
    pub fn new<'a>(weights: impl Into<TensorRef<'a>>) -> Result<Self, ToyError> {
        let weights = weights.into();
        let quantization = match weights {
            TensorRef::Float(_) => None,
            TensorRef::Quantized(q) => Some(QuantizationInfo {
                bits: q.bits(),
                footprint_ratio: memory_footprint(q) as f64 / (4 * q.len()) as f64,
            }),
        };
        Ok(Self {
            classifier: ToyClassifier::new(weights)?,
            quantization,
        })
    }
}

impl ModelRunner for ToyRunner {
    fn kind(&self) -> &'static str {
        "toy"
    }

    fn generate(&self, example: &Example, _prompt: &str, _config: &InferenceConfig) -> Result<Generation, RunnerError> {
        let label = self.classifier.predict(&example.text);
        Ok(Generation::text(label.as_str()))
    }

    fn quantization(&self) -> Option<QuantizationInfo> {
        self.quantization
    }
}

impl ModelRunner for HttpClient {
    fn kind(&self) -> &'static str {
        "http"
    }

    fn generate(&self, _example: &Example, prompt: &str, config: &InferenceConfig) -> Result<Generation, RunnerError> {
        match HttpClient::generate(self, config, prompt) {
            Ok(r) => Ok(Generation {
                text: r.text,
                eval_count: r.eval_count,
                eval_duration_ns: r.eval_duration_ns,
            }),
            Err(e @ HttpGenerateError::ConnectionFailed { .. }) => Err(RunnerError::Unreachable(e.to_string())),
            Err(e) => Err(RunnerError::Failed(e.to_string())),
        }
    }

    fn honors_beam_size(&self) -> bool {
        self.sends_beam_size()
    }
}
