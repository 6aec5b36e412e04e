use serde::{Deserialize, Serialize};

use super::sample::InputSample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Non-negative attribution tensor congruent with its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub values: Tensor,
    pub method_id: String,
}

impl SaliencyMap {
    /// Wraps already post-processed values. Rejects negative or non-finite
    /// entries.
    pub fn new(values: Tensor, method_id: impl Into<String>) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::NonFiniteInput("saliency map".into()));
        }
        if values.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("saliency map has negative entries".into()));
        }
        Ok(SaliencyMap {
            values,
            method_id: method_id.into(),
        })
    }

    pub fn from_raw(raw: &Tensor, method_id: impl Into<String>) -> Result<Self> {
        Ok(SaliencyMap {
            values: postprocess_saliency(raw)?,
            method_id: method_id.into(),
        })
    }

    pub fn data(&self) -> &[f64] {
        self.values.data()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Keeps positive attribution only, then min-max normalizes over the whole
/// observation. A map that is constant after clamping becomes all zeros.
pub fn postprocess_saliency(raw: &Tensor) -> Result<Tensor> {
    if !raw.is_finite() {
        return Err(Error::NonFiniteInput("raw attribution".into()));
    }
    let clamped = raw.map(|v| v.max(0.0));
    let (lo, hi) = clamped
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if clamped.is_empty() || range <= 0.0 {
        return Ok(Tensor::zeros(raw.shape()));
    }
    Ok(clamped.map(|v| (v - lo) / range))
}

pub fn validate_pair(sample: &InputSample, map: &SaliencyMap) -> Result<()> {
    let expected = sample.map_shape();
    let actual = map.values.shape();
    if expected.len() != actual.len() {
        return Err(Error::ModalityMismatch(format!(
            "{} input {:?} cannot pair with map of rank {}",
            sample.modality.as_str(),
            sample.data.shape(),
            actual.len()
        )));
    }
    if expected != actual {
        return Err(Error::ShapeMismatch {
            expected,
            actual: actual.to_vec(),
        });
    }
    Ok(())
}
