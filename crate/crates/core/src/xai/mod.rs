//! Built-in saliency generators: occlusion, LIME, Kernel SHAP, vanilla
//! gradient, input x gradient, integrated and expected gradients, GradCAM,
//! and the SmoothGrad / VarGrad wrappers.
//!
//! Every generator first produces a raw signed attribution in map shape and
//! then runs it through [`postprocess_saliency`]. Point-cloud gradients are
//! reduced to one value per point by summing the three coordinates.

mod gradient;
mod mask;
mod occlusion;
mod surrogate;

use serde::{Deserialize, Serialize};

use crate::data::{postprocess_saliency, Modality, ModelOracle, SaliencyMap};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub use gradient::{
    expected_gradients, gradcam, input_x_gradient, integrated_gradients, upscale_nearest, vanilla_gradient,
    vanilla_gradient_raw,
};
pub use mask::{build_feature_mask, FeatureMask};
pub use occlusion::occlusion;
pub use surrogate::{kernel_shap, lasso, lime, shapley_kernel_weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "OC")]
    Occlusion,
    #[serde(rename = "LIME")]
    Lime,
    #[serde(rename = "KS")]
    KernelShap,
    #[serde(rename = "VG")]
    VanillaGradient,
    #[serde(rename = "IxG")]
    InputXGradient,
    #[serde(rename = "IG")]
    IntegratedGradients,
    #[serde(rename = "EG")]
    ExpectedGradients,
    #[serde(rename = "GC")]
    GradCam,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Occlusion => "OC",
            Method::Lime => "LIME",
            Method::KernelShap => "KS",
            Method::VanillaGradient => "VG",
            Method::InputXGradient => "IxG",
            Method::IntegratedGradients => "IG",
            Method::ExpectedGradients => "EG",
            Method::GradCam => "GC",
        }
    }
}

/// Noise-averaging wrapper around a base method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrapper {
    #[default]
    None,
    SmoothGrad,
    VarGrad,
}

/// Hyperparameters of one explanation method. Fields a method does not use
/// are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XaiConfig {
    pub method: Method,
    /// Occlusion window edge length and stride (grids).
    pub kernel: usize,
    pub stride: usize,
    /// Feature-mask patch edge length for LIME and Kernel SHAP (grids).
    pub patch: usize,
    /// Value that stands for a removed feature.
    pub baseline: f64,
    /// Integration steps (IG).
    pub n_steps: usize,
    /// Monte-Carlo draws (EG) or surrogate samples (LIME, sampled KS);
    /// zero means four per feature group.
    pub n_samples: usize,
    /// Noise added to each EG baseline draw.
    pub noise_sd: f64,
    /// Lasso (grids) or ridge (clouds) penalty for LIME.
    pub regularization: f64,
    /// Width of LIME's exponential cosine kernel.
    pub kernel_width: f64,
    /// Exact Kernel SHAP enumeration up to this many groups.
    pub exact_max_groups: usize,
    pub wrapper: Wrapper,
    pub wrapper_samples: usize,
    pub wrapper_noise_sd: f64,
    pub seed: u64,
}

impl Default for XaiConfig {
    fn default() -> Self {
        XaiConfig {
            method: Method::IntegratedGradients,
            kernel: 4,
            stride: 2,
            patch: 4,
            baseline: 0.0,
            n_steps: 64,
            n_samples: 0,
            noise_sd: 0.0,
            regularization: 0.01,
            kernel_width: 0.75,
            exact_max_groups: 16,
            wrapper: Wrapper::None,
            wrapper_samples: 16,
            wrapper_noise_sd: 0.1,
            seed: 0,
        }
    }
}

impl XaiConfig {
    pub fn new(method: Method) -> Self {
        XaiConfig {
            method,
            ..XaiConfig::default()
        }
    }

    /// Identifier used on the method axis of score tensors.
    pub fn method_id(&self) -> String {
        match self.wrapper {
            Wrapper::None => self.method.as_str().to_string(),
            Wrapper::SmoothGrad => format!("{}+SG", self.method.as_str()),
            Wrapper::VarGrad => format!("{}+VarG", self.method.as_str()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [self.kernel, self.stride, self.patch, self.n_steps, self.wrapper_samples];
        if counts.contains(&0) {
            return Err(Error::InvalidSpec("explanation counts must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.wrapper_noise_sd >= 0.0 && self.regularization >= 0.0) {
            return Err(Error::InvalidSpec("noise levels and penalties must be non-negative".into()));
        }
        if !(self.kernel_width > 0.0) || !self.baseline.is_finite() {
            return Err(Error::InvalidSpec("kernel width must be positive, baseline finite".into()));
        }
        Ok(())
    }
}

/// Sums per-coordinate attributions of a cloud into one value per point;
/// grids pass through.
pub(crate) fn reduce_to_map(raw: Tensor, modality: Modality) -> Result<Tensor> {
    match modality {
        Modality::PointCloud => {
            let n = raw.shape()[0];
            let per_point = raw.data().chunks(3).map(|c| c.iter().sum()).collect();
            Tensor::new(vec![n], per_point)
        }
        _ => Ok(raw),
    }
}

/// Raw signed attribution of the base method, in map shape.
fn base_raw(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    cfg: &XaiConfig,
    pool: &[Tensor],
) -> Result<Tensor> {
    let baseline = Tensor::filled(x.shape(), cfg.baseline);
    match cfg.method {
        Method::Occlusion => occlusion(model, x, modality, target, cfg),
        Method::Lime => {
            let mask = build_feature_mask(modality, x.shape(), cfg.patch)?;
            lime(model, x, modality, target, &mask, cfg)
        }
        Method::KernelShap => {
            let mask = build_feature_mask(modality, x.shape(), cfg.patch)?;
            kernel_shap(model, x, modality, target, &mask, cfg)
        }
        Method::VanillaGradient => reduce_to_map(vanilla_gradient_raw(model, x, target)?.map(f64::abs), modality),
        Method::InputXGradient => reduce_to_map(input_x_gradient(model, x, target)?, modality),
        Method::IntegratedGradients => {
            reduce_to_map(integrated_gradients(model, x, &baseline, target, cfg.n_steps)?, modality)
        }
        Method::ExpectedGradients => {
            let n = if cfg.n_samples == 0 { 64 } else { cfg.n_samples };
            reduce_to_map(expected_gradients(model, x, pool, target, n, cfg.noise_sd, cfg.seed)?, modality)
        }
        Method::GradCam => gradcam(model, x, modality, target),
    }
}

/// Raw attribution including the SmoothGrad / VarGrad wrapper, before
/// post-processing.
pub fn raw_attribution(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    cfg: &XaiConfig,
    pool: &[Tensor],
) -> Result<Tensor> {
    cfg.validate()?;
    match cfg.wrapper {
        Wrapper::None => base_raw(model, x, modality, target, cfg, pool),
        Wrapper::SmoothGrad | Wrapper::VarGrad => {
            let mut r = rng::stream(rng::derive(cfg.seed, 0x5347), 0);
            let mut sum: Option<Vec<f64>> = None;
            let mut sum_sq: Vec<f64> = Vec::new();
            let mut shape = Vec::new();
            for _ in 0..cfg.wrapper_samples {
                let noisy = crate::perturb::gaussian_noise(x, cfg.wrapper_noise_sd, &mut r);
                let m = base_raw(model, &noisy, modality, target, cfg, pool)?;
                shape = m.shape().to_vec();
                let s = sum.get_or_insert_with(|| vec![0.0; m.len()]);
                if sum_sq.is_empty() {
                    sum_sq = vec![0.0; m.len()];
                }
                for ((a, b), v) in s.iter_mut().zip(sum_sq.iter_mut()).zip(m.data()) {
                    *a += v;
                    *b += v * v;
                }
            }
            let n = cfg.wrapper_samples as f64;
            let sum = sum.unwrap_or_default();
            let out = match cfg.wrapper {
                Wrapper::SmoothGrad => sum.iter().map(|s| s / n).collect(),
                _ => sum
                    .iter()
                    .zip(&sum_sq)
                    .map(|(s, q)| (q / n - (s / n).powi(2)).max(0.0))
                    .collect(),
            };
            Tensor::new(shape, out)
        }
    }
}

/// Runs a method and post-processes its output into a saliency map.
pub fn explain(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    cfg: &XaiConfig,
    pool: &[Tensor],
) -> Result<SaliencyMap> {
    let raw = raw_attribution(model, x, modality, target, cfg, pool)?;
    SaliencyMap::new(postprocess_saliency(&raw)?, cfg.method_id())
}

/// An explanation as a function of the input, as robustness metrics need
/// it. Implementations must be deterministic given `x`.
pub trait Explain: Sync {
    /// Post-processed saliency values in map shape.
    fn explain(&self, x: &Tensor) -> Result<Tensor>;
}

impl<F> Explain for F
where
    F: Fn(&Tensor) -> Result<Tensor> + Sync,
{
    fn explain(&self, x: &Tensor) -> Result<Tensor> {
        self(x)
    }
}

/// Binds a model, a method configuration and a fixed target class. The same
/// method seed is reused for every re-explanation.
pub struct MethodExplainer<'a> {
    pub model: &'a dyn ModelOracle,
    pub modality: Modality,
    pub target: usize,
    pub cfg: XaiConfig,
    pub pool: &'a [Tensor],
}

impl Explain for MethodExplainer<'_> {
    fn explain(&self, x: &Tensor) -> Result<Tensor> {
        Ok(explain(self.model, x, self.modality, self.target, &self.cfg, self.pool)?.values)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// `f_c(x) = w_c . x + b_c`, with an exact gradient.
    pub struct Linear {
        pub w: Vec<Vec<f64>>,
        pub b: Vec<f64>,
    }

    impl ModelOracle for Linear {
        fn num_classes(&self) -> usize {
            self.w.len()
        }

        fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
            Ok(self
                .w
                .iter()
                .zip(&self.b)
                .map(|(w, b)| b + w.iter().zip(x.data()).map(|(a, v)| a * v).sum::<f64>())
                .collect())
        }

        fn gradient(&self, x: &Tensor, target: usize) -> Result<Tensor> {
            Tensor::new(x.shape().to_vec(), self.w[target].clone())
        }
    }

    pub struct Constant;

    impl ModelOracle for Constant {
        fn num_classes(&self) -> usize {
            2
        }

        fn predict(&self, _x: &Tensor) -> Result<Vec<f64>> {
            Ok(vec![0.3, -0.2])
        }

        fn gradient(&self, x: &Tensor, _target: usize) -> Result<Tensor> {
            Ok(Tensor::zeros(x.shape()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::Linear;
    use super::*;

    fn linear_image() -> (Linear, Tensor) {
        let n = 4 * 4 * 3;
        let w: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = Tensor::new(vec![4, 4, 3], (0..n).map(|i| (i as f64 * 0.1).cos()).collect()).unwrap();
        (Linear { w: vec![w], b: vec![0.0] }, x)
    }

    #[test]
    fn smoothgrad_without_noise_is_base() {
        let (m, x) = linear_image();
        let mut cfg = XaiConfig::new(Method::InputXGradient);
        let base = raw_attribution(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        cfg.wrapper = Wrapper::SmoothGrad;
        cfg.wrapper_noise_sd = 0.0;
        let sg = raw_attribution(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        for (a, b) in sg.data().iter().zip(base.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        cfg.wrapper = Wrapper::VarGrad;
        let vg = raw_attribution(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        assert!(vg.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn smoothgrad_of_linear_gradient_is_exact() {
        let (m, x) = linear_image();
        let mut cfg = XaiConfig::new(Method::VanillaGradient);
        let base = raw_attribution(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        cfg.wrapper = Wrapper::SmoothGrad;
        cfg.wrapper_noise_sd = 0.7;
        let sg = raw_attribution(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        assert_eq!(sg, base);
    }

    #[test]
    fn wrapped_methods_are_seed_deterministic() {
        let (m, x) = linear_image();
        let mut cfg = XaiConfig::new(Method::InputXGradient);
        cfg.wrapper = Wrapper::VarGrad;
        cfg.seed = 4;
        let a = explain(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        let b = explain(&m, &x, Modality::Image, 0, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method_id, "IxG+VarG");
    }

    #[test]
    fn method_ids_roundtrip_through_json() {
        let cfg = XaiConfig::new(Method::KernelShap);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"KS\""));
        let back: XaiConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
