//! Fixed-point quantization of real-valued updates and their embedding into
//! the scalar field.
//!
//! A coordinate `x` becomes `clamp(round_half_even(x·2^f), −M·2^f, M·2^f)`.
//! Negative integers map to `q − |x|`. The configuration refuses to exist
//! unless the largest possible weighted aggregate,
//! `max_clients · max_weight · M·2^f`, fits in a signed 64-bit integer. That
//! is far below `q/2`, so field arithmetic on encoded values never wraps and
//! decoding is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{tags, Digest, HashAlg, Scalar};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("non-finite value at coordinate {0}")]
    NonFiniteValue(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quantized update was produced under a different configuration")]
    ConfigMismatch,
    #[error("value {0} exceeds the representable range")]
    OverflowRisk(String),
    #[error("invalid fixed-point configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub fractional_bits: u32,
    pub clamp_magnitude: f64,
    pub dimension: usize,
    /// Upper bound on participants in one aggregate.
    pub max_clients: u64,
    /// Upper bound on any single aggregation weight.
    pub max_weight: u64,
    #[serde(default)]
    pub hash: HashAlg,
}

impl FixedPointConfig {
    pub const DEFAULT_FRACTIONAL_BITS: u32 = 16;
    pub const DEFAULT_CLAMP: f64 = 8.0;

    /// Defaults (`f = 16`, `M = 8`) for a given dimension and aggregation envelope.
    pub fn new(dimension: usize, max_clients: u64, max_weight: u64) -> Result<Self, EncodingError> {
        Self {
            fractional_bits: Self::DEFAULT_FRACTIONAL_BITS,
            clamp_magnitude: Self::DEFAULT_CLAMP,
            dimension,
            max_clients,
            max_weight,
            hash: HashAlg::default(),
        }
        .validated()
    }

    /// Checks every invariant, including the aggregate-safety bound.
    pub fn validated(self) -> Result<Self, EncodingError> {
        let bad = |m: &str| Err(EncodingError::InvalidConfig(m.to_string()));
        if self.dimension == 0 {
            return bad("dimension must be at least 1");
        }
        if self.fractional_bits > 40 {
            return bad("fractional_bits must be at most 40");
        }
        if !(self.clamp_magnitude.is_finite() && self.clamp_magnitude > 0.0) {
            return bad("clamp_magnitude must be finite and positive");
        }
        if self.max_clients == 0 || self.max_weight == 0 {
            return bad("max_clients and max_weight must be positive");
        }
        let bound = (self.clamp_units() as u128)
            .checked_mul(self.max_clients as u128)
            .and_then(|x| x.checked_mul(self.max_weight as u128));
        match bound {
            Some(b) if b <= i64::MAX as u128 => Ok(self),
            _ => bad("max_clients · max_weight · M · 2^f must fit in a signed 64-bit integer"),
        }
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.fractional_bits) as f64
    }

    /// `⌊M·S⌋`, the largest quantized magnitude.
    pub fn clamp_units(&self) -> i64 {
        (self.clamp_magnitude * self.scale()).floor() as i64
    }

    /// Largest magnitude any weighted aggregate can reach.
    pub fn aggregate_bound(&self) -> i64 {
        (self.clamp_units() as i128 * self.max_clients as i128 * self.max_weight as i128) as i64
    }

    pub fn id(&self) -> Digest {
        Digest::of(self.hash, tags::FIXED_POINT, &[&self.to_bytes()])
    }
}

impl Encode for FixedPointConfig {
    fn encode(&self, w: &mut Writer) {
        w.put_u32(self.fractional_bits);
        w.put_f64(self.clamp_magnitude);
        w.put_u64(self.dimension as u64);
        w.put_u64(self.max_clients);
        w.put_u64(self.max_weight);
        w.put(&self.hash);
    }
}

impl Decode for FixedPointConfig {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let cfg = FixedPointConfig {
            fractional_bits: r.u32()?,
            clamp_magnitude: r.f64()?,
            dimension: r.u64()? as usize,
            max_clients: r.u64()?,
            max_weight: r.u64()?,
            hash: r.get()?,
        };
        cfg.validated()
            .map_err(|_| WireError::NonCanonical("fixed-point configuration"))
    }
}

/// A client's update in fixed point, bound to a configuration and round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedUpdate {
    pub values: Vec<i64>,
    pub config_id: Digest,
    pub round: u64,
}

impl Encode for QuantizedUpdate {
    fn encode(&self, w: &mut Writer) {
        w.put_seq(&self.values);
        w.put(&self.config_id);
        w.put_u64(self.round);
    }
}

impl Decode for QuantizedUpdate {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(QuantizedUpdate {
            values: r.seq()?,
            config_id: r.get()?,
            round: r.u64()?,
        })
    }
}

pub fn quantize(update: &[f64], cfg: &FixedPointConfig, round: u64) -> Result<QuantizedUpdate, EncodingError> {
    if update.len() != cfg.dimension {
        return Err(EncodingError::DimensionMismatch {
            expected: cfg.dimension,
            got: update.len(),
        });
    }
    let scale = cfg.scale();
    let limit = cfg.clamp_units();
    let values = update
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !x.is_finite() {
                return Err(EncodingError::NonFiniteValue(i));
            }
            let scaled = (x * scale).round_ties_even();
            Ok(scaled.clamp(-(limit as f64), limit as f64) as i64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuantizedUpdate {
        values,
        config_id: cfg.id(),
        round,
    })
}

pub fn dequantize(qu: &QuantizedUpdate, cfg: &FixedPointConfig) -> Result<Vec<f64>, EncodingError> {
    if qu.config_id != cfg.id() {
        return Err(EncodingError::ConfigMismatch);
    }
    if qu.values.len() != cfg.dimension {
        return Err(EncodingError::DimensionMismatch {
            expected: cfg.dimension,
            got: qu.values.len(),
        });
    }
    let scale = cfg.scale();
    Ok(qu.values.iter().map(|&v| v as f64 / scale).collect())
}

/// Embeds integers into the field: `x ↦ x` for `x ≥ 0`, `x ↦ q − |x|` otherwise.
pub fn encode_to_scalars(values: &[i64]) -> Vec<Scalar> {
    values.iter().map(|&v| Scalar::from_i64(v)).collect()
}

/// Field encoding of a quantized update, refusing values outside the clamp range.
pub fn encode_update(qu: &QuantizedUpdate, cfg: &FixedPointConfig) -> Result<Vec<Scalar>, EncodingError> {
    let limit = cfg.clamp_units();
    if let Some(v) = qu.values.iter().find(|v| v.unsigned_abs() > limit as u64) {
        return Err(EncodingError::OverflowRisk(v.to_string()));
    }
    Ok(encode_to_scalars(&qu.values))
}

/// Inverts [`encode_to_scalars`] for every scalar that represents a signed
/// 64-bit integer; anything else is an overflow.
pub fn decode_scalar(s: &Scalar) -> Result<i64, EncodingError> {
    fn small(bytes: &[u8; 32]) -> Option<u64> {
        if bytes[8..].iter().any(|&b| b != 0) {
            return None;
        }
        let mut lo = [0u8; 8];
        lo.copy_from_slice(&bytes[..8]);
        Some(u64::from_le_bytes(lo))
    }
    if let Some(v) = small(&s.to_bytes()) {
        if v <= i64::MAX as u64 {
            return Ok(v as i64);
        }
    }
    if let Some(m) = small(&(-*s).to_bytes()) {
        if m <= 1u64 << 63 {
            return Ok((m as i64).wrapping_neg());
        }
    }
    Err(EncodingError::OverflowRisk(hex::encode(s.to_bytes())))
}

pub fn decode_from_scalars(scalars: &[Scalar]) -> Result<Vec<i64>, EncodingError> {
    scalars.iter().map(decode_scalar).collect()
}

/// Exact `Σ vᵢ²`.
pub fn l2_norm_squared(qu: &QuantizedUpdate) -> u128 {
    qu.values
        .iter()
        .map(|&v| {
            let m = v.unsigned_abs() as u128;
            m * m
        })
        .sum()
}
