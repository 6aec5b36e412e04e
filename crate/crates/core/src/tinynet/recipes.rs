use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use super::network::{InputLayout, Network};
use crate::data::{InputSample, Modality};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;
use rand::Rng as _;

/// Named synthetic data generators. Every class is tied to a known region
/// (a quadrant, an octant, a shape), so a faithful saliency map has a known
/// hot spot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// 16x16x3 images, 4 classes; the class quadrant is brighter.
    BrightQuadrant,
    /// 12x12x12 volumes, 8 classes; the class octant is brighter.
    BrightOctant,
    /// 256x3 point clouds sampled from sphere, cube, cylinder and torus
    /// surfaces.
    Primitives,
}

const BACKGROUND: f64 = 0.25;
const NOISE_SD: f64 = 0.1;
const BRIGHTNESS: f64 = 0.5;
const JITTER: f64 = 0.02;

impl Recipe {
    pub fn modality(self) -> Modality {
        match self {
            Recipe::BrightQuadrant => Modality::Image,
            Recipe::BrightOctant => Modality::Volume,
            Recipe::Primitives => Modality::PointCloud,
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Recipe::BrightQuadrant | Recipe::Primitives => 4,
            Recipe::BrightOctant => 8,
        }
    }

    pub fn input_shape(self) -> Vec<usize> {
        match self {
            Recipe::BrightQuadrant => vec![16, 16, 3],
            Recipe::BrightOctant => vec![12, 12, 12],
            Recipe::Primitives => vec![256, 3],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::BrightQuadrant => "bright_quadrant",
            Recipe::BrightOctant => "bright_octant",
            Recipe::Primitives => "primitives",
        }
    }

    /// Draws one sample of class `label` from its own random stream.
    pub fn sample(self, label: usize, r: &mut rng::Rng) -> Tensor {
        match self {
            Recipe::BrightQuadrant => {
                let (w, h, c) = (16, 16, 3);
                let (qi, qj) = (label / 2, label % 2);
                let mut data = Vec::with_capacity(w * h * c);
                for i in 0..w {
                    for j in 0..h {
                        let hot = i / 8 == qi && j / 8 == qj;
                        for _ in 0..c {
                            let base = BACKGROUND + NOISE_SD * rng::normal(r);
                            data.push(if hot { base + BRIGHTNESS } else { base });
                        }
                    }
                }
                Tensor::new(vec![w, h, c], data).expect("shape")
            }
            Recipe::BrightOctant => {
                let n = 12;
                let (ox, oy, oz) = (label / 4, (label / 2) % 2, label % 2);
                let mut data = Vec::with_capacity(n * n * n);
                for x in 0..n {
                    for y in 0..n {
                        for z in 0..n {
                            let hot = x / 6 == ox && y / 6 == oy && z / 6 == oz;
                            let base = BACKGROUND + NOISE_SD * rng::normal(r);
                            data.push(if hot { base + BRIGHTNESS } else { base });
                        }
                    }
                }
                Tensor::new(vec![n, n, n], data).expect("shape")
            }
            Recipe::Primitives => {
                let n = 256;
                let mut data = Vec::with_capacity(n * 3);
                for _ in 0..n {
                    let p = primitive_point(label, r);
                    for v in p {
                        data.push(v + JITTER * rng::normal(r));
                    }
                }
                Tensor::new(vec![n, 3], data).expect("shape")
            }
        }
    }
}

fn primitive_point(shape: usize, r: &mut rng::Rng) -> [f64; 3] {
    use std::f64::consts::TAU;
    match shape {
        // sphere of radius 0.8
        0 => {
            let v: [f64; 3] = [rng::normal(r), rng::normal(r), rng::normal(r)];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-12);
            [0.8 * v[0] / norm, 0.8 * v[1] / norm, 0.8 * v[2] / norm]
        }
        // surface of the cube [-0.7, 0.7]^3
        1 => {
            let face = r.random_range(0..6);
            let mut p = [r.random_range(-0.7..0.7), r.random_range(-0.7..0.7), r.random_range(-0.7..0.7)];
            p[face / 2] = if face % 2 == 0 { -0.7 } else { 0.7 };
            p
        }
        // open cylinder along z, radius 0.5, height 2
        2 => {
            let t = r.random_range(0.0..TAU);
            [0.5 * t.cos(), 0.5 * t.sin(), r.random_range(-1.0..1.0)]
        }
        // torus around z, radii 0.7 and 0.25
        _ => {
            let (u, v) = (r.random_range(0.0..TAU), r.random_range(0.0..TAU));
            let ring = 0.7 + 0.25 * v.cos();
            [ring * u.cos(), ring * u.sin(), 0.25 * v.sin()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub recipe: Recipe,
    pub seed: u64,
    pub modality: Modality,
    pub samples: Vec<InputSample>,
}

impl SyntheticDataset {
    /// Class-balanced: sample `i` has label `i % num_classes` and is drawn
    /// from stream `i` of `seed`, so a prefix of a larger dataset equals the
    /// smaller one.
    pub fn generate(recipe: Recipe, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("dataset size must be positive".into()));
        }
        let k = recipe.num_classes();
        let samples = (0..n)
            .map(|i| {
                let label = i % k;
                let mut r = rng::stream(seed, i as u64);
                InputSample::new(
                    recipe.modality(),
                    recipe.sample(label, &mut r),
                    label,
                    format!("{}-{seed}-{i}", recipe.as_str()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticDataset {
            recipe,
            seed,
            modality: recipe.modality(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A named layer stack together with the input it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layout: InputLayout,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Strided conv, ReLU, flatten, hidden dense, ReLU, logits.
    pub fn image_cnn(w: usize, h: usize, c: usize, classes: usize, hidden: usize) -> Self {
        let (k, ch) = (4, 4);
        let flat = ch * (w / k) * (h / k);
        Architecture {
            name: "cnn2d".into(),
            input_shape: vec![w, h, c],
            layout: InputLayout::ChannelLast2d,
            layers: vec![
                LayerSpec::Conv2d { in_channels: c, out_channels: ch, kernel: k, stride: k },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: flat, units: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, units: classes },
            ],
        }
    }

    pub fn volume_cnn(n: usize, classes: usize, hidden: usize) -> Self {
        let (k, ch) = (4, 4);
        let flat = ch * (n / k).pow(3);
        Architecture {
            name: "cnn3d".into(),
            input_shape: vec![n, n, n],
            layout: InputLayout::Volume,
            layers: vec![
                LayerSpec::Conv3d { in_channels: 1, out_channels: ch, kernel: k, stride: k },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: flat, units: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, units: classes },
            ],
        }
    }

    /// Shared per-point layer, average pooling, then an MLP head.
    pub fn point_mlp(points: usize, classes: usize, hidden: usize) -> Self {
        let features = 16;
        Architecture {
            name: "pointmlp".into(),
            input_shape: vec![points, 3],
            layout: InputLayout::Points,
            layers: vec![
                LayerSpec::Conv2d { in_channels: 3, out_channels: features, kernel: 1, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::GlobalAvgPool,
                LayerSpec::Dense { inputs: features, units: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, units: classes },
            ],
        }
    }

    /// Plain MLP on the flattened input.
    pub fn mlp(input_shape: Vec<usize>, classes: usize, hidden: usize) -> Self {
        let n = input_shape.iter().product();
        Architecture {
            name: "mlp".into(),
            input_shape,
            layout: InputLayout::Flat,
            layers: vec![
                LayerSpec::Dense { inputs: n, units: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, units: classes },
            ],
        }
    }

    /// The default network for a recipe.
    pub fn default_for(recipe: Recipe) -> Self {
        let shape = recipe.input_shape();
        let k = recipe.num_classes();
        match recipe {
            Recipe::BrightQuadrant => Architecture::image_cnn(shape[0], shape[1], shape[2], k, 16),
            Recipe::BrightOctant => Architecture::volume_cnn(shape[0], k, 16),
            Recipe::Primitives => Architecture::point_mlp(shape[0], k, 16),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        Network::new(self.input_shape.clone(), self.layout, self.layers.clone(), seed)
    }
}
