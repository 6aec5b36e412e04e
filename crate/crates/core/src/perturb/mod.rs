//! Perturbation baselines and segmentation primitives shared by the
//! metrics: blur and noise, SLIC superpixels, point-cloud k-means, noisy
//! linear imputation and x-axis traversal.

mod blur;
mod impute;
mod kmeans;
mod slic;
mod traverse;

use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub use blur::{gaussian_blur, gaussian_kernel, gaussian_noise, uniform_noise};
pub use impute::noisy_linear_imputation;
pub use kmeans::{kmeans_points, kmeans_points_traced, KMeansTrace};
pub use slic::{slic, SlicConfig};
pub use traverse::{shift_x, x_axis_traversal};

/// A labelling of saliency-map elements. For images every channel entry of
/// a pixel carries the pixel's label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub assignment: Vec<usize>,
    pub n_segments: usize,
}

impl Segmentation {
    /// Relabels to contiguous ids in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Segmentation {
            assignment,
            n_segments: map.len(),
        }
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_segments];
        for (i, &s) in self.assignment.iter().enumerate() {
            out[s].push(i);
        }
        out
    }
}

/// How removed elements are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbSpec {
    BaselineValue { value: f64 },
    GaussianBlur { sigma: f64 },
    GaussianNoise { sd: f64 },
    UniformNoise { low: f64, high: f64 },
    /// Additive noise around the input mean, used where blurring has no
    /// meaning (volumes, point clouds).
    MeanNoise { sd: f64 },
    LinearImputation { noise_sd: f64 },
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PerturbSpec::BaselineValue { value } => value.is_finite(),
            PerturbSpec::GaussianBlur { sigma } => sigma > 0.0,
            PerturbSpec::GaussianNoise { sd } | PerturbSpec::MeanNoise { sd } => sd >= 0.0,
            PerturbSpec::UniformNoise { low, high } => low <= high,
            PerturbSpec::LinearImputation { noise_sd } => noise_sd >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid perturbation {self:?}")))
        }
    }

    /// A fully perturbed copy of `x`; removing an entry means taking its
    /// value from this tensor. Imputation depends on the removed set and is
    /// not expressible here.
    pub fn baseline(&self, x: &Tensor, modality: Modality, seed: u64) -> Result<Tensor> {
        self.validate()?;
        let mut r = rng::stream(seed, 0);
        match *self {
            PerturbSpec::BaselineValue { value } => Ok(Tensor::filled(x.shape(), value)),
            PerturbSpec::GaussianBlur { sigma } => gaussian_blur(x, modality, sigma),
            PerturbSpec::GaussianNoise { sd } => Ok(gaussian_noise(x, sd, &mut r)),
            PerturbSpec::UniformNoise { low, high } => Ok(uniform_noise(x, low, high, &mut r)),
            PerturbSpec::MeanNoise { sd } => {
                let mean = x.mean();
                Ok(gaussian_noise(&Tensor::filled(x.shape(), mean), sd, &mut r))
            }
            PerturbSpec::LinearImputation { .. } => Err(Error::InvalidSpec(
                "imputation needs the removed set; use noisy_linear_imputation".into(),
            )),
        }
    }
}

/// Expands per-element flags to per-entry flags (3 entries per point).
pub fn expand_elements(modality: Modality, element_flags: &[bool]) -> Vec<bool> {
    let k = modality.entries_per_element();
    element_flags.iter().flat_map(|&f| std::iter::repeat_n(f, k)).collect()
}

/// Copies `baseline` into `x` at every removed element.
pub fn apply_removal(x: &Tensor, baseline: &Tensor, modality: Modality, removed: &[bool]) -> Tensor {
    let k = modality.entries_per_element();
    let mut out = x.clone();
    let b = baseline.data();
    for (e, v) in out.data_mut().iter_mut().enumerate() {
        if removed[e / k] {
            *v = b[e];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_become_contiguous() {
        let s = Segmentation::from_labels(&[7, 7, 2, 9, 2]);
        assert_eq!(s.assignment, vec![0, 0, 1, 2, 1]);
        assert_eq!(s.n_segments, 3);
        assert_eq!(s.members()[1], vec![2, 4]);
    }

    #[test]
    fn removal_takes_baseline_entries() {
        let x = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::zeros(&[2, 3]);
        let y = apply_removal(&x, &b, Modality::PointCloud, &[false, true]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbSpec::UniformNoise { low: 1.0, high: 0.0 }.validate().is_err());
        assert!(PerturbSpec::GaussianBlur { sigma: 0.0 }.validate().is_err());
        assert!(PerturbSpec::GaussianNoise { sd: 0.0 }.validate().is_ok());
    }
}
