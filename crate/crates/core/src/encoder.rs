//! Conversions between attribute values, integer codes, and the real-valued
//! input/target space of the network.

use crate::domain::{AttackScenario, AttributeKind, Vocabulary, N_ATTRIBUTES};
use crate::error::{Error, Result};

/// Network input: twelve components in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_ATTRIBUTES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Codes of each attribute in schema order.
pub fn encode_scenario(scenario: &AttackScenario, vocab: &Vocabulary) -> Result<[u32; N_ATTRIBUTES]> {
    let mut codes = [0u32; N_ATTRIBUTES];
    for (kind, slot) in AttributeKind::ALL.into_iter().zip(codes.iter_mut()) {
        let value = scenario.get(kind).ok_or_else(|| Error::UnknownValue {
            kind,
            value: String::new(),
        })?;
        *slot = vocab.code_of(kind, value).ok_or_else(|| Error::UnknownValue {
            kind,
            value: value.text().to_string(),
        })?;
    }
    Ok(codes)
}

/// Maps each code linearly onto `[-1, 1]` by its kind's vocabulary size;
/// a kind with a single value maps to 0.
pub fn normalize_features(codes: &[u32; N_ATTRIBUTES], vocab: &Vocabulary) -> Result<FeatureVector> {
    let mut x = [0.0; N_ATTRIBUTES];
    for ((kind, &code), slot) in AttributeKind::ALL.into_iter().zip(codes).zip(x.iter_mut()) {
        let size = vocab.size(kind);
        *slot = normalize_code(code, size).ok_or(Error::CodeOutOfRange { kind, code, size })?;
    }
    Ok(FeatureVector(x))
}

/// `-1 + 2 * code / (size - 1)`, or `None` when `code >= size`.
pub fn normalize_code(code: u32, size: usize) -> Option<f64> {
    match size {
        s if code as usize >= s => None,
        1 => Some(0.0),
        s => Some(-1.0 + 2.0 * code as f64 / (s - 1) as f64),
    }
}

/// Default half-width of the target band.
pub const DEFAULT_BAND: f64 = 0.8;

/// Affine map from the pattern-id range `[lo, hi]` onto `[-band, band]`.
///
/// A degenerate range (`lo == hi`) maps its single id to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetScaling {
    lo: u32,
    hi: u32,
    band: f64,
}

impl TargetScaling {
    pub fn new(lo: u32, hi: u32, band: f64) -> Result<Self> {
        if hi < lo {
            return Err(Error::Config(format!("scaling range ({lo}, {hi}) is empty")));
        }
        if !(band > 0.0 && band <= 1.0) {
            return Err(Error::Config(format!("band must lie in (0, 1], got {band}")));
        }
        Ok(TargetScaling { lo, hi, band })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    fn span(&self) -> f64 {
        (self.hi - self.lo) as f64
    }

    pub fn scale(&self, pattern_id: u32) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&pattern_id) {
            return Err(Error::TargetOutOfRange {
                id: pattern_id,
                lo: self.lo,
                hi: self.hi,
            });
        }
        if self.lo == self.hi {
            return Ok(0.0);
        }
        Ok(-self.band + 2.0 * self.band * (pattern_id - self.lo) as f64 / self.span())
    }

    /// Inverse of [`TargetScaling::scale`], extrapolating linearly outside
    /// the band.
    pub fn unscale(&self, y: f64) -> f64 {
        if self.lo == self.hi {
            return self.lo as f64;
        }
        self.lo as f64 + (y + self.band) * self.span() / (2.0 * self.band)
    }
}

pub fn scale_target(pattern_id: u32, scaling: &TargetScaling) -> Result<f64> {
    scaling.scale(pattern_id)
}

pub fn unscale_output(y: f64, scaling: &TargetScaling) -> f64 {
    scaling.unscale(y)
}

/// Rounds half away from zero, then clamps into `[lo, hi]`. NaN decodes to `lo`.
pub fn decode_prediction(estimate: f64, lo: u32, hi: u32) -> u32 {
    debug_assert!(hi >= lo);
    let rounded = estimate.round();
    if rounded.is_nan() || rounded <= lo as f64 {
        lo
    } else if rounded >= hi as f64 {
        hi
    } else {
        rounded as u32
    }
}
