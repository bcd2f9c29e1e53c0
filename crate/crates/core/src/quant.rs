//! Per-tensor uniform affine quantization.
//!
//! A float tensor `w` is mapped onto `2^bits` integer levels:
//!
//! ```text
//! delta = (max(w) - min(w)) / (2^bits - 1)
//! code  = round((w - min(w)) / delta)        // half away from zero
//! w'    = code * delta + min(w)
//! ```
//!
//! Constant tensors (max == min) get `delta = 0` and all-zero codes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 8;

/// Bytes used by the two 32-bit affine parameters (delta, minimum).
const AFFINE_PARAM_BYTES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("tensor has no elements")]
    EmptyTensor,
    #[error("non-finite value {value} at index {index}")]
    NonFiniteInput { index: usize, value: f32 },
    #[error("bit width {0} outside supported range [{MIN_BITS}, {MAX_BITS}]")]
    BitsOutOfRange(u32),
    #[error("shape {shape:?} describes {expected} elements but {actual} were given")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape contains a zero dimension: {0:?}")]
    ZeroDimension(Vec<usize>),
    #[error("code {code} at index {index} exceeds the {bits}-bit maximum")]
    CodeOutOfRange { index: usize, code: u8, bits: u32 },
    #[error("invalid affine parameters: {0}")]
    InvalidParams(String),
}

fn check_shape(shape: &[usize], len: usize) -> Result<(), QuantError> {
    if shape.contains(&0) {
        return Err(QuantError::ZeroDimension(shape.to_vec()));
    }
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(QuantError::ShapeMismatch {
            shape: shape.to_vec(),
            expected,
            actual: len,
        });
    }
    Ok(())
}

fn check_bits(bits: u32) -> Result<(), QuantError> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(QuantError::BitsOutOfRange(bits))
    }
}

fn max_code(bits: u32) -> u32 {
    (1u32 << bits) - 1
}

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    shape: Vec<usize>,
    values: Vec<f32>,
}

impl WeightTensor {
    /// Builds a tensor, checking that the shape matches and every value is finite.
    pub fn new(shape: Vec<usize>, values: Vec<f32>) -> Result<Self, QuantError> {
        check_shape(&shape, values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(QuantError::NonFiniteInput { index, value });
        }
        Ok(Self { shape, values })
    }

    /// One-dimensional tensor over `values`.
    pub fn from_vec(values: Vec<f32>) -> Result<Self, QuantError> {
        if values.is_empty() {
            return Err(QuantError::EmptyTensor);
        }
        Self::new(vec![values.len()], values)
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, QuantError> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn memory_footprint(&self) -> usize {
        4 * self.values.len()
    }
}

/// `bits`-wide integer codes plus the affine parameters that reconstruct them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    codes: Vec<u8>,
    bits: u32,
    delta: f32,
    minimum: f32,
}

impl QuantizedTensor {
    /// Assembles a quantized tensor from raw parts, enforcing code range and the
    /// `delta == 0 => codes == 0` rule.
    pub fn from_parts(
        shape: Vec<usize>,
        codes: Vec<u8>,
        bits: u32,
        delta: f32,
        minimum: f32,
    ) -> Result<Self, QuantError> {
        check_bits(bits)?;
        check_shape(&shape, codes.len())?;
        if !delta.is_finite() || delta < 0.0 {
            return Err(QuantError::InvalidParams(format!("delta {delta}")));
        }
        if !minimum.is_finite() {
            return Err(QuantError::InvalidParams(format!("minimum {minimum}")));
        }
        let limit = max_code(bits);
        for (index, &code) in codes.iter().enumerate() {
            if u32::from(code) > limit || (delta == 0.0 && code != 0) {
                return Err(QuantError::CodeOutOfRange { index, code, bits });
            }
        }
        Ok(Self {
            shape,
            codes,
            bits,
            delta,
            minimum,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn delta(&self) -> f32 {
        self.delta
    }

    pub fn minimum(&self) -> f32 {
        self.minimum
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Packed code bytes plus the two f32 affine parameters.
    pub fn memory_footprint(&self) -> usize {
        (self.codes.len() * self.bits as usize).div_ceil(8) + AFFINE_PARAM_BYTES
    }
}

/// Either tensor representation; used wherever both are accepted.
#[derive(Debug, Clone, Copy)]
pub enum TensorRef<'a> {
    Float(&'a WeightTensor),
    Quantized(&'a QuantizedTensor),
}

impl<'a> From<&'a WeightTensor> for TensorRef<'a> {
    fn from(t: &'a WeightTensor) -> Self {
        TensorRef::Float(t)
    }
}

impl<'a> From<&'a QuantizedTensor> for TensorRef<'a> {
    fn from(t: &'a QuantizedTensor) -> Self {
        TensorRef::Quantized(t)
    }
}

pub fn memory_footprint<'a>(t: impl Into<TensorRef<'a>>) -> usize {
    match t.into() {
        TensorRef::Float(w) => w.memory_footprint(),
        TensorRef::Quantized(q) => q.memory_footprint(),
    }
}

pub fn quantize(w: &WeightTensor, bits: u32) -> Result<QuantizedTensor, QuantError> {
    if w.is_empty() {
        return Err(QuantError::EmptyTensor);
    }
    if let Some((index, &value)) = w.values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(QuantError::NonFiniteInput { index, value });
    }
    check_bits(bits)?;

    let (lo, hi) = w
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    if hi == lo {
        return Ok(QuantizedTensor {
            shape: w.shape.clone(),
            codes: vec![0; w.len()],
            bits,
            delta: 0.0,
            minimum: lo,
        });
    }

    let levels = f64::from(max_code(bits));
    let range = f64::from(hi) - f64::from(lo);
    // (w - min) * levels / (max - min): one rounding, so grid midpoints stay exact.
    let codes = w
        .values
        .iter()
        .map(|&v| {
            let scaled = (f64::from(v) - f64::from(lo)) * levels / range;
            // f64::round is half-away-from-zero.
            scaled.round().clamp(0.0, levels) as u8
        })
        .collect();

    Ok(QuantizedTensor {
        shape: w.shape.clone(),
        codes,
        bits,
        delta: (range / levels) as f32,
        minimum: lo,
    })
}

pub fn dequantize(q: &QuantizedTensor) -> WeightTensor {
    let delta = f64::from(q.delta);
    let minimum = f64::from(q.minimum);
    let values = if q.delta == 0.0 {
        vec![q.minimum; q.codes.len()]
    } else {
        q.codes
            .iter()
            .map(|&c| (f64::from(c) * delta + minimum) as f32)
            .collect()
    };
    WeightTensor {
        shape: q.shape.clone(),
        values,
    }
}

/// Reconstruction error of a quantize/dequantize round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantErrorStats {
    pub max_abs_error: f64,
    pub mean_squared_error: f64,
    pub delta: f64,
}

pub fn quant_error(w: &WeightTensor, bits: u32) -> Result<QuantErrorStats, QuantError> {
    let q = quantize(w, bits)?;
    let restored = dequantize(&q);
    let (max_abs, sum_sq) = w
        .values
        .iter()
        .zip(restored.values())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
        .fold((0.0f64, 0.0f64), |(m, s), e| (m.max(e), s + e * e));
    Ok(QuantErrorStats {
        max_abs_error: max_abs,
        mean_squared_error: sum_sq / w.len() as f64,
        delta: f64::from(q.delta),
    })
}
