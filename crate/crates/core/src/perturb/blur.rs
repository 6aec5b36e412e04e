use rand::Rng as _;

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

/// Normalized 1D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / z).collect()
}

/// Symmetric reflection (`d c b a | a b c d | d c b a`), valid for any
/// offset.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur over the two spatial axes of a `(W, H, C)`
/// image, channel by channel.
pub fn gaussian_blur(x: &Tensor, modality: Modality, sigma: f64) -> Result<Tensor> {
    if modality != Modality::Image {
        return Err(Error::WrongModality(format!(
            "gaussian blur needs an image, got {}",
            modality.as_str()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidSpec(format!("blur sigma must be positive, got {sigma}")));
    }
    modality.check_input_shape(x.shape())?;
    let (w, h, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let src = x.data();
    let at = |i: usize, j: usize, ch: usize| (i * h + j) * c + ch;
    let mut tmp = vec![0.0; src.len()];
    for i in 0..w {
        for j in 0..h {
            for ch in 0..c {
                tmp[at(i, j, ch)] = k
                    .iter()
                    .enumerate()
                    .map(|(t, kv)| kv * src[at(reflect(i as isize + t as isize - r, w), j, ch)])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for i in 0..w {
        for j in 0..h {
            for ch in 0..c {
                out[at(i, j, ch)] = k
                    .iter()
                    .enumerate()
                    .map(|(t, kv)| kv * tmp[at(i, reflect(j as isize + t as isize - r, h), ch)])
                    .sum();
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub fn gaussian_noise(x: &Tensor, sd: f64, r: &mut Rng) -> Tensor {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v += sd * rng::normal(r));
    out
}

pub fn uniform_noise(x: &Tensor, low: f64, high: f64, r: &mut Rng) -> Tensor {
    if low == high {
        return x.map(|v| v + low);
    }
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v += r.random_range(low..high));
    out
}
