use rand::Rng as _;

use super::reduce_to_map;
use crate::data::{Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Signed gradient of the target logit with respect to the input.
pub fn vanilla_gradient_raw(model: &dyn ModelOracle, x: &Tensor, target: usize) -> Result<Tensor> {
    model.gradient(x, target)
}

/// Absolute gradient in map shape.
pub fn vanilla_gradient(model: &dyn ModelOracle, x: &Tensor, modality: Modality, target: usize) -> Result<Tensor> {
    reduce_to_map(vanilla_gradient_raw(model, x, target)?.map(f64::abs), modality)
}

/// `x * grad`, in input shape.
pub fn input_x_gradient(model: &dyn ModelOracle, x: &Tensor, target: usize) -> Result<Tensor> {
    model.gradient(x, target)?.zip_map(x, |g, v| g * v)
}

fn path_point(x: &Tensor, b: &Tensor, alpha: f64) -> Tensor {
    b.zip_map(x, |bv, xv| bv + alpha * (xv - bv)).expect("same shape")
}

/// `(x - b) * mean of gradients at alpha = (j + 0.5) / n_steps` along the
/// straight line from `b` to `x`, in input shape.
pub fn integrated_gradients(
    model: &dyn ModelOracle,
    x: &Tensor,
    baseline: &Tensor,
    target: usize,
    n_steps: usize,
) -> Result<Tensor> {
    x.check_same_shape(baseline)?;
    if n_steps == 0 {
        return Err(Error::InvalidSpec("integrated gradients needs at least one step".into()));
    }
    let mut acc = vec![0.0; x.len()];
    for j in 0..n_steps {
        let alpha = (j as f64 + 0.5) / n_steps as f64;
        let g = model.gradient(&path_point(x, baseline, alpha), target)?;
        for (a, v) in acc.iter_mut().zip(g.data()) {
            *a += v;
        }
    }
    let out = acc
        .iter()
        .zip(x.data().iter().zip(baseline.data()))
        .map(|(a, (xv, bv))| (xv - bv) * a / n_steps as f64)
        .collect();
    Tensor::new(x.shape().to_vec(), out)
}

/// Monte-Carlo mean of `(x - b) * grad(b + alpha (x - b))` with `b` drawn
/// from `pool` (plus optional Gaussian noise) and `alpha ~ U(0, 1)`. Draw `s`
/// uses its own stream, so a run with more samples extends a shorter one.
pub fn expected_gradients(
    model: &dyn ModelOracle,
    x: &Tensor,
    pool: &[Tensor],
    target: usize,
    n_samples: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Tensor> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if n_samples == 0 {
        return Err(Error::InvalidSpec("expected gradients needs at least one sample".into()));
    }
    let mut acc = vec![0.0; x.len()];
    for s in 0..n_samples {
        let mut r = rng::stream(seed, s as u64);
        let pick = &pool[r.random_range(0..pool.len())];
        x.check_same_shape(pick)?;
        let alpha: f64 = r.random();
        let b = if noise_sd > 0.0 {
            crate::perturb::gaussian_noise(pick, noise_sd, &mut r)
        } else {
            pick.clone()
        };
        let g = model.gradient(&path_point(x, &b, alpha), target)?;
        for ((a, gv), (xv, bv)) in acc.iter_mut().zip(g.data()).zip(x.data().iter().zip(b.data())) {
            *a += (xv - bv) * gv;
        }
    }
    Tensor::new(x.shape().to_vec(), acc.into_iter().map(|a| a / n_samples as f64).collect())
}

/// Nearest-neighbour resize of a `(w, h)` grid to `(big_w, big_h)`.
pub fn upscale_nearest(cam: &[f64], (w, h): (usize, usize), (big_w, big_h): (usize, usize)) -> Vec<f64> {
    let mut out = Vec::with_capacity(big_w * big_h);
    for i in 0..big_w {
        for j in 0..big_h {
            out.push(cam[(i * w / big_w) * h + j * h / big_h]);
        }
    }
    out
}

/// GradCAM on images: channel weights are the spatially averaged gradients
/// at the last convolutional stage, the map is `ReLU(sum_k w_k A_k)`
/// upscaled to the input grid and shared by all channels.
pub fn gradcam(model: &dyn ModelOracle, x: &Tensor, modality: Modality, target: usize) -> Result<Tensor> {
    if modality != Modality::Image {
        return Err(Error::WrongModality(format!("GradCAM is image-only, got {}", modality.as_str())));
    }
    modality.check_input_shape(x.shape())?;
    let (acts, grads) = model.conv_activations(x, target)?;
    let shape = acts.shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch {
            expected: vec![0, 0, 0],
            actual: shape,
        });
    }
    let (k, w, h) = (shape[0], shape[1], shape[2]);
    let plane = w * h;
    let mut cam = vec![0.0; plane];
    for ch in 0..k {
        let g = &grads.data()[ch * plane..(ch + 1) * plane];
        let weight = g.iter().sum::<f64>() / plane as f64;
        for (c, a) in cam.iter_mut().zip(&acts.data()[ch * plane..(ch + 1) * plane]) {
            *c += weight * a;
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    let (big_w, big_h, channels) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let up = upscale_nearest(&cam, (w, h), (big_w, big_h));
    Tensor::new(
        x.shape().to_vec(),
        up.into_iter().flat_map(|v| std::iter::repeat_n(v, channels)).collect(),
    )
}
