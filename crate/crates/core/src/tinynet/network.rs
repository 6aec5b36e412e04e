use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use crate::data::ModelOracle;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;
use rand::Rng as _;

/// Maps a sample tensor onto the channel-first internal layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLayout {
    /// Any shape, flattened to a vector.
    Flat,
    /// `(W, H, C)` to `(C, W, H)`.
    ChannelLast2d,
    /// `(X, Y, Z)` to `(1, X, Y, Z)`.
    Volume,
    /// `(N, 3)` to `(3, N, 1)`, so a 1x1 convolution is a shared per-point
    /// dense layer.
    Points,
}

impl InputLayout {
    pub fn internal_shape(self, sample: &[usize]) -> Result<Vec<usize>> {
        let bad = || Err(Error::InvalidSpec(format!("layout {self:?} cannot take {sample:?}")));
        Ok(match self {
            InputLayout::Flat => vec![sample.iter().product()],
            InputLayout::ChannelLast2d => {
                if sample.len() != 3 {
                    return bad();
                }
                vec![sample[2], sample[0], sample[1]]
            }
            InputLayout::Volume => {
                if sample.len() != 3 {
                    return bad();
                }
                vec![1, sample[0], sample[1], sample[2]]
            }
            InputLayout::Points => {
                if sample.len() != 2 || sample[1] != 3 {
                    return bad();
                }
                vec![3, sample[0], 1]
            }
        })
    }

    /// Sample-order values to internal-order values.
    fn to_internal(self, sample_shape: &[usize], x: &[f64]) -> Vec<f64> {
        match self {
            InputLayout::Flat | InputLayout::Volume => x.to_vec(),
            InputLayout::ChannelLast2d => {
                let (w, h, c) = (sample_shape[0], sample_shape[1], sample_shape[2]);
                let mut out = vec![0.0; x.len()];
                for i in 0..w {
                    for j in 0..h {
                        for ch in 0..c {
                            out[(ch * w + i) * h + j] = x[(i * h + j) * c + ch];
                        }
                    }
                }
                out
            }
            InputLayout::Points => {
                let n = sample_shape[0];
                let mut out = vec![0.0; x.len()];
                for p in 0..n {
                    for d in 0..3 {
                        out[d * n + p] = x[p * 3 + d];
                    }
                }
                out
            }
        }
    }

    /// Inverse of [`InputLayout::to_internal`].
    fn to_sample(self, sample_shape: &[usize], g: &[f64]) -> Vec<f64> {
        match self {
            InputLayout::Flat | InputLayout::Volume => g.to_vec(),
            InputLayout::ChannelLast2d => {
                let (w, h, c) = (sample_shape[0], sample_shape[1], sample_shape[2]);
                let mut out = vec![0.0; g.len()];
                for i in 0..w {
                    for j in 0..h {
                        for ch in 0..c {
                            out[(i * h + j) * c + ch] = g[(ch * w + i) * h + j];
                        }
                    }
                }
                out
            }
            InputLayout::Points => {
                let n = sample_shape[0];
                let mut out = vec![0.0; g.len()];
                for p in 0..n {
                    for d in 0..3 {
                        out[p * 3 + d] = g[d * n + p];
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub layout: InputLayout,
    pub layers: Vec<LayerSpec>,
    pub weights: Vec<f64>,
    pub rng_seed: u64,
    #[serde(skip)]
    shapes: Vec<Vec<usize>>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

/// Recorded forward pass: `acts[0]` is the internal input and `acts[i + 1]`
/// the output of layer `i`.
pub struct Tape {
    pub acts: Vec<Vec<f64>>,
}

impl Network {
    /// Builds a network with uniform `±sqrt(6 / (fan_in + fan_out))` weights
    /// and zero biases.
    pub fn new(input_shape: Vec<usize>, layout: InputLayout, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut net = Network {
            input_shape,
            layout,
            layers,
            weights: Vec::new(),
            rng_seed: seed,
            shapes: Vec::new(),
            offsets: Vec::new(),
        };
        net.resolve()?;
        let total = *net.offsets.last().unwrap();
        let mut weights = vec![0.0; total];
        let mut r = rng::stream(seed, 0);
        for (i, layer) in net.layers.iter().enumerate() {
            if let Some((fan_in, fan_out, nw)) = layer.fans() {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for w in &mut weights[net.offsets[i]..net.offsets[i] + nw] {
                    *w = r.random_range(-bound..bound);
                }
            }
        }
        net.weights = weights;
        Ok(net)
    }

    pub fn with_weights(
        input_shape: Vec<usize>,
        layout: InputLayout,
        layers: Vec<LayerSpec>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Network {
            input_shape,
            layout,
            layers,
            weights,
            rng_seed: 0,
            shapes: Vec::new(),
            offsets: Vec::new(),
        };
        net.resolve()?;
        let expected = *net.offsets.last().unwrap();
        if net.weights.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: vec![expected],
                actual: vec![net.weights.len()],
            });
        }
        Ok(net)
    }

    /// Recomputes cached shapes and parameter offsets; call after
    /// deserializing.
    pub fn resolve(&mut self) -> Result<()> {
        let mut shape = self.layout.internal_shape(&self.input_shape)?;
        let mut shapes = vec![shape.clone()];
        let mut offsets = vec![0];
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            shapes.push(shape.clone());
            offsets.push(offsets.last().unwrap() + layer.param_count());
        }
        if shape.len() != 1 {
            return Err(Error::InvalidSpec("network must end in a flat logit vector".into()));
        }
        self.shapes = shapes;
        self.offsets = offsets;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().map(|s| s[0]).unwrap_or(0)
    }

    /// Internal (channel-first) shape of the output of layer `index`.
    pub fn layer_shape(&self, index: usize) -> Result<&[usize]> {
        self.shapes
            .get(index + 1)
            .map(|s| s.as_slice())
            .ok_or(Error::InvalidLayer {
                index,
                len: self.layers.len(),
            })
    }

    fn params(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.clone(),
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn record(&self, x: &Tensor) -> Result<Tape> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(self.layout.to_internal(&self.input_shape, x.data()));
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward(self.params(i), &acts[i], &self.shapes[i], &mut out);
            acts.push(out);
        }
        Ok(Tape { acts })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.record(x)?.acts.pop().unwrap())
    }

    pub fn forward_batch(&self, batch: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        batch.iter().map(|x| self.forward(x)).collect()
    }

    /// Reverse pass from the gradient `dout` at the output of layer
    /// `from_layer` down to the layer input at `to_act`. Accumulates
    /// parameter gradients when `dparams` is given.
    fn reverse(
        &self,
        tape: &Tape,
        from_layer: usize,
        to_act: usize,
        dout: Vec<f64>,
        mut dparams: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let mut grad = dout;
        for i in (to_act..=from_layer).rev() {
            let dp = dparams
                .as_deref_mut()
                .map(|d| &mut d[self.offsets[i]..self.offsets[i + 1]]);
            grad = self.layers[i].backward(self.params(i), &tape.acts[i], &self.shapes[i], &grad, dp);
        }
        grad
    }

    fn one_hot(&self, target: usize) -> Result<Vec<f64>> {
        let n = self.num_classes();
        if target >= n {
            return Err(Error::InvalidSpec(format!("target {target} >= {n} classes")));
        }
        let mut g = vec![0.0; n];
        g[target] = 1.0;
        Ok(g)
    }

    /// Gradient of logit `target` with respect to the input, in sample
    /// layout.
    pub fn input_gradient(&self, x: &Tensor, target: usize) -> Result<Tensor> {
        let tape = self.record(x)?;
        let g = self.reverse(&tape, self.layers.len() - 1, 0, self.one_hot(target)?, None);
        Tensor::new(self.input_shape.clone(), self.layout.to_sample(&self.input_shape, &g))
    }

    /// Output of layer `layer_index`, in internal channel-first layout.
    pub fn activations(&self, x: &Tensor, layer_index: usize) -> Result<Tensor> {
        let shape = self.layer_shape(layer_index)?.to_vec();
        let mut tape = self.record(x)?;
        Tensor::new(shape, tape.acts.swap_remove(layer_index + 1))
    }

    /// Output of layer `layer_index` and the gradient of logit `target` with
    /// respect to it.
    pub fn activation_gradient(&self, x: &Tensor, layer_index: usize, target: usize) -> Result<(Tensor, Tensor)> {
        let shape = self.layer_shape(layer_index)?.to_vec();
        let tape = self.record(x)?;
        let last = self.layers.len() - 1;
        let g = if layer_index == last {
            self.one_hot(target)?
        } else {
            self.reverse(&tape, last, layer_index + 1, self.one_hot(target)?, None)
        };
        Ok((
            Tensor::new(shape.clone(), tape.acts[layer_index + 1].clone())?,
            Tensor::new(shape, g)?,
        ))
    }

    /// Index whose output feeds GradCAM: the last convolution, or the ReLU
    /// directly after it.
    pub fn last_conv_stage(&self) -> Option<usize> {
        let conv = self.layers.iter().rposition(|l| l.is_conv())?;
        match self.layers.get(conv + 1) {
            Some(LayerSpec::Relu) => Some(conv + 1),
            _ => Some(conv),
        }
    }

    /// Softmax cross-entropy loss and its gradient over all parameters.
    pub fn loss_gradient(&self, x: &Tensor, label: usize) -> Result<(f64, Vec<f64>)> {
        let tape = self.record(x)?;
        let logits = tape.acts.last().unwrap();
        let p = crate::data::softmax(logits);
        let loss = -p[label].max(1e-300).ln();
        let mut dlogits = p;
        dlogits[label] -= 1.0;
        let mut dparams = vec![0.0; self.param_count()];
        self.reverse(&tape, self.layers.len() - 1, 0, dlogits, Some(&mut dparams));
        Ok((loss, dparams))
    }
}

impl ModelOracle for Network {
    fn num_classes(&self) -> usize {
        Network::num_classes(self)
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn gradient(&self, x: &Tensor, target: usize) -> Result<Tensor> {
        self.input_gradient(x, target)
    }

    fn representation(&self, x: &Tensor) -> Result<Vec<f64>> {
        if self.layers.len() < 2 {
            return Err(Error::NoRepresentationCapability);
        }
        Ok(self.activations(x, self.layers.len() - 2)?.into_data())
    }

    fn conv_activations(&self, x: &Tensor, target: usize) -> Result<(Tensor, Tensor)> {
        let stage = self.last_conv_stage().ok_or(Error::NoActivationCapability)?;
        self.activation_gradient(x, stage, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinynet::Architecture;

    fn identity_dense() -> Network {
        let layers = vec![LayerSpec::Dense { inputs: 3, units: 3 }];
        let mut w = vec![0.0; 12];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        Network::with_weights(vec![3], InputLayout::Flat, layers, w).unwrap()
    }

    #[test]
    fn identity_dense_forward() {
        let net = identity_dense();
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(net.forward(&x).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(net.activations(&x, 0).unwrap().data(), x.data());
        assert!(matches!(net.activations(&x, 1), Err(Error::InvalidLayer { .. })));
    }

    #[test]
    fn linear_gradient_is_weight_row() {
        let layers = vec![LayerSpec::Dense { inputs: 4, units: 1 }];
        let w = vec![0.5, -1.0, 2.0, 3.0, 0.25];
        let net = Network::with_weights(vec![4], InputLayout::Flat, layers, w).unwrap();
        let g = net.input_gradient(&Tensor::from_vec(vec![1.0, 1.0, 1.0, 1.0]), 0).unwrap();
        assert_eq!(g.data(), &[0.5, -1.0, 2.0, 3.0]);
    }

    #[test]
    fn dead_relu_gives_zero_gradient() {
        let layers = vec![
            LayerSpec::Dense { inputs: 2, units: 2 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 2, units: 1 },
        ];
        // first hidden unit reads x0 only, second reads x1 only
        let w = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let net = Network::with_weights(vec![2], InputLayout::Flat, layers, w).unwrap();
        let g = net.input_gradient(&Tensor::from_vec(vec![-1.0, 2.0]), 0).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn shapes_and_penultimate_width() {
        let net = Architecture::image_cnn(16, 16, 3, 4, 12).build(1).unwrap();
        let x = Tensor::filled(&[16, 16, 3], 0.1);
        let rep = net.representation(&x).unwrap();
        assert_eq!(rep.len(), 12);
        // conv k=4 s=4 on 16x16 gives 4x4 with 4 channels
        let act = net.activations(&x, 0).unwrap();
        assert_eq!(act.shape(), &[4, 4, 4]);
        assert_eq!(net.param_count(), net.weights.len());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let net = Architecture::image_cnn(16, 16, 3, 4, 8).build(3).unwrap();
        let x = Tensor::new(vec![16, 16, 3], (0..768).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.clone().forward(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let net = identity_dense();
        assert!(matches!(
            net.forward(&Tensor::from_vec(vec![1.0, 2.0])),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
