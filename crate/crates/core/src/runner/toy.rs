//! Desk-scale stand-in classifier: hashed bag-of-words features scored by a
//! `3 x dims` linear model trained with an averaged perceptron.
//!
//! Its weight matrix is an ordinary [`WeightTensor`], so the same
//! quantize -> dequantize -> infer path used for real models runs end to end.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, Example};
use crate::metrics::Label;
use crate::quant::{dequantize, QuantError, TensorRef, WeightTensor};

pub const EPOCHS: usize = 10;
const NUM_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ToyError {
    #[error("expected weights shaped [3, dims], got {0:?}")]
    ShapeMismatch(Vec<usize>),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("feature dimension must be positive")]
    ZeroDims,
    #[error(transparent)]
    Tensor(#[from] QuantError),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Sparse hashed term counts, sorted by bucket.
fn features(text: &str, dims: usize) -> Vec<(usize, f64)> {
    let mut buckets: Vec<usize> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| (fnv1a(t.to_lowercase().as_bytes()) % dims as u64) as usize)
        .collect();
    buckets.sort_unstable();
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(buckets.len());
    for b in buckets {
        match out.last_mut() {
            Some((last, n)) if *last == b => *n += 1.0,
            _ => out.push((b, 1.0)),
        }
    }
    out
}

fn argmax(scores: &[f64; NUM_CLASSES]) -> usize {
    // strict comparison keeps the earliest class on ties
    (1..NUM_CLASSES).fold(0, |best, c| if scores[c] > scores[best] { c } else { best })
}

fn scores(weights: &[f32], dims: usize, feats: &[(usize, f64)]) -> [f64; NUM_CLASSES] {
    let mut s = [0.0; NUM_CLASSES];
    for (c, score) in s.iter_mut().enumerate() {
        let row = &weights[c * dims..(c + 1) * dims];
        *score = feats.iter().map(|&(b, n)| f64::from(row[b]) * n).sum();
    }
    s
}

/// Trains a deterministic averaged perceptron; identical inputs give bitwise-identical weights.
pub fn toy_classifier_train(corpus: &Corpus, dims: usize, seed: u64) -> Result<WeightTensor, ToyError> {
    if corpus.is_empty() {
        return Err(ToyError::EmptyCorpus);
    }
    if dims == 0 {
        return Err(ToyError::ZeroDims);
    }
    let data: Vec<(Vec<(usize, f64)>, usize)> = corpus
        .examples
        .iter()
        .map(|ex| (features(&ex.text, dims), ex.label.index()))
        .collect();

    let mut w = vec![0.0f64; NUM_CLASSES * dims];
    // running sum of step-weighted updates for the averaging trick
    let mut u = vec![0.0f64; NUM_CLASSES * dims];
    let mut step = 1.0f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, gold) = &data[i];
            let mut s = [0.0; NUM_CLASSES];
            for (c, score) in s.iter_mut().enumerate() {
                *score = feats.iter().map(|&(b, n)| w[c * dims + b] * n).sum();
            }
            let predicted = argmax(&s);
            if predicted != *gold {
                for &(b, n) in feats {
                    w[gold * dims + b] += n;
                    u[gold * dims + b] += step * n;
                    w[predicted * dims + b] -= n;
                    u[predicted * dims + b] -= step * n;
                }
            }
            step += 1.0;
        }
    }

    let averaged = w.iter().zip(&u).map(|(wi, ui)| (wi - ui / step) as f32).collect();
    Ok(WeightTensor::new(vec![NUM_CLASSES, dims], averaged)?)
}

fn check_shape(shape: &[usize]) -> Result<usize, ToyError> {
    match shape {
        [NUM_CLASSES, dims] if *dims > 0 => Ok(*dims),
        other => Err(ToyError::ShapeMismatch(other.to_vec())),
    }
}

/// Class with the highest score; ties go to positive, then negative, then neutral.
pub fn toy_classifier_predict<'a>(weights: impl Into<TensorRef<'a>>, text: &str) -> Result<Label, ToyError> {
    let restored;
    let w = match weights.into() {
        TensorRef::Float(w) => w,
        TensorRef::Quantized(q) => {
            restored = dequantize(q);
            &restored
        }
    };
    let dims = check_shape(w.shape())?;
    Ok(Label::CLASSES[argmax(&scores(w.values(), dims, &features(text, dims)))])
}

/// Prepared classifier for repeated prediction; quantized weights are dequantized once.
#[derive(Debug, Clone)]
pub struct ToyClassifier {
    weights: WeightTensor,
    dims: usize,
}

impl ToyClassifier {
    pub fn new<'a>(weights: impl Into<TensorRef<'a>>) -> Result<Self, ToyError> {
        let weights = match weights.into() {
            TensorRef::Float(w) => w.clone(),
            TensorRef::Quantized(q) => dequantize(q),
        };
        let dims = check_shape(weights.shape())?;
        Ok(Self { weights, dims })
    }

    pub fn predict(&self, text: &str) -> Label {
        Label::CLASSES[argmax(&scores(self.weights.values(), self.dims, &features(text, self.dims)))]
    }

    pub fn accuracy(&self, corpus: &Corpus) -> f64 {
        let correct = corpus
            .examples
            .iter()
            .filter(|ex| self.predict(&ex.text) == ex.label)
            .count();
        correct as f64 / corpus.len().max(1) as f64
    }
}

const VOCAB_SIZE: usize = 12;

fn vocabulary(label: Label) -> Vec<String> {
    (0..VOCAB_SIZE)
        .map(|i| format!("{}{i:02}", &label.as_str()[..3]))
        .collect()
}

/// Synthetic corpus whose classes draw words from three disjoint vocabularies,
/// so it is linearly separable by construction. Classes cycle positive, negative, neutral.
pub fn separable_corpus(n: usize, seed: u64) -> Corpus {
    let vocabs: Vec<Vec<String>> = Label::CLASSES.iter().map(|&l| vocabulary(l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let class = i % NUM_CLASSES;
            let len = rng.random_range(3..=8);
            let words: Vec<&str> = (0..len)
                .map(|_| vocabs[class][rng.random_range(0..VOCAB_SIZE)].as_str())
                .collect();
            Example {
                text: words.join(" "),
                label: Label::CLASSES[class],
            }
        })
        .collect();
    Corpus::new(examples, format!("synthetic:separable:{n}:{seed}"))
}
