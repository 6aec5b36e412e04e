use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pluggable prediction interface consumed by every explanation method and
/// metric. Only `predict` is mandatory; the other capabilities report their
/// absence with a dedicated error.
///
/// Implementations must be deterministic for fixed inputs.
pub trait ModelOracle: Sync {
    fn num_classes(&self) -> usize;

    /// Logits for one input.
    fn predict(&self, x: &Tensor) -> Result<Vec<f64>>;

    fn predict_batch(&self, xs: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Gradient of the `target` logit with respect to the input.
    fn gradient(&self, _x: &Tensor, _target: usize) -> Result<Tensor> {
        Err(Error::NoGradientCapability)
    }

    /// Penultimate-layer activations.
    fn representation(&self, _x: &Tensor) -> Result<Vec<f64>> {
        Err(Error::NoRepresentationCapability)
    }

    /// Activations of the last convolutional stage, channel-first
    /// `(K, spatial...)`, together with the gradient of the `target` logit
    /// with respect to them.
    fn conv_activations(&self, _x: &Tensor, _target: usize) -> Result<(Tensor, Tensor)> {
        Err(Error::NoActivationCapability)
    }

    fn probabilities(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict(x)?))
    }

    fn logit(&self, x: &Tensor, target: usize) -> Result<f64> {
        let logits = self.predict(x)?;
        logits
            .get(target)
            .copied()
            .ok_or_else(|| Error::InvalidSpec(format!("target {target} out of range")))
    }

    fn predicted_class(&self, x: &Tensor) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
