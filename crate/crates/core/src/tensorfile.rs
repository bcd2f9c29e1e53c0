//! Plain-text tensor fixtures.
//!
//! Float tensor: line 1 is the space-separated shape, line 2 the space-separated values.
//! Quantized tensor: line 1 shape, line 2 `bits delta minimum`, line 3 the codes.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::quant::{QuantError, QuantizedTensor, WeightTensor};

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Tensor(#[from] QuantError),
}

fn parse_line<T: FromStr>(line: Option<&str>, number: usize, what: &str) -> Result<Vec<T>, TensorFileError> {
    let line = line.ok_or_else(|| TensorFileError::Parse {
        line: number,
        message: format!("missing {what} line"),
    })?;
    line.split_whitespace()
        .map(|tok| {
            tok.parse().map_err(|_| TensorFileError::Parse {
                line: number,
                message: format!("invalid {what} entry {tok:?}"),
            })
        })
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn parse_tensor(text: &str) -> Result<WeightTensor, TensorFileError> {
    let mut lines = text.lines();
    let shape: Vec<usize> = parse_line(lines.next(), 1, "shape")?;
    let values: Vec<f32> = parse_line(lines.next(), 2, "value")?;
    if values.is_empty() {
        return Err(QuantError::EmptyTensor.into());
    }
    Ok(WeightTensor::new(shape, values)?)
}

pub fn format_tensor(t: &WeightTensor) -> String {
    format!("{}\n{}\n", join(t.shape()), join(t.values()))
}

pub fn parse_quantized(text: &str) -> Result<QuantizedTensor, TensorFileError> {
    let mut lines = text.lines();
    let shape: Vec<usize> = parse_line(lines.next(), 1, "shape")?;
    let params: Vec<f64> = parse_line(lines.next(), 2, "parameter")?;
    let [bits, delta, minimum] = params[..] else {
        return Err(TensorFileError::Parse {
            line: 2,
            message: "expected `bits delta minimum`".into(),
        });
    };
    let codes: Vec<u8> = parse_line(lines.next(), 3, "code")?;
    Ok(QuantizedTensor::from_parts(
        shape,
        codes,
        bits as u32,
        delta as f32,
        minimum as f32,
    )?)
}

pub fn format_quantized(q: &QuantizedTensor) -> String {
    let mut out = join(q.shape());
    let _ = write!(out, "\n{} {} {}\n", q.bits(), q.delta(), q.minimum());
    out.push_str(&join(q.codes()));
    out.push('\n');
    out
}
