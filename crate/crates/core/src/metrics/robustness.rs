//! Robustness metrics: how much does the explanation move when the input
//! moves a little? Sample `j` of every Monte-Carlo loop draws from stream
//! `j`, so a run with more samples extends a run with fewer.

use rand::Rng as _;

use super::{MetricConfig, Score};
use crate::data::{Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::perturb::{gaussian_noise, uniform_noise, x_axis_traversal};
use crate::rng;
use crate::stats::pearson;
use crate::tensor::Tensor;
use crate::xai::Explain;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// `|| (a - b) / (a + eps) ||_2`; an exactly zero denominator becomes `eps`.
fn relative_change(a: &[f64], b: &[f64], eps: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let d = if p + eps == 0.0 { eps } else { p + eps };
            ((p - q) / d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn check_samples(cfg: &MetricConfig) -> Result<()> {
    if cfg.n_samples < 8 {
        return Err(Error::InvalidSpec("robustness metrics need at least 8 samples".into()));
    }
    Ok(())
}

/// Largest `||e(x) - e(x')|| / ||x - x'||` over points drawn uniformly from
/// the L2 ball of radius `cfg.radius`. LowerIsBetter.
pub fn local_lipschitz_estimate(expl: &dyn Explain, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    check_samples(cfg)?;
    let e = expl.explain(x)?;
    let d = x.len() as f64;
    let mut best: f64 = 0.0;
    for j in 0..cfg.n_samples {
        let mut r = rng::stream(cfg.seed, j as u64);
        let dir = rng::normals(&mut r, x.len(), 1.0);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: f64 = r.random();
        let scale = cfg.radius * u.powf(1.0 / d) / norm;
        let moved = Tensor::new(x.shape().to_vec(), x.data().iter().zip(&dir).map(|(a, b)| a + scale * b).collect())?;
        let step = dist(x.data(), moved.data());
        if !(step > 0.0) {
            return Err(Error::DegenerateSample(format!("sample {j} coincides with the input")));
        }
        best = best.max(dist(e.data(), expl.explain(&moved)?.data()) / step);
    }
    Ok(best)
}

/// Largest `||e(x) - e(x')||` over points drawn uniformly from the
/// L-infinity ball of radius `cfg.radius`. LowerIsBetter.
pub fn max_sensitivity(expl: &dyn Explain, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    check_samples(cfg)?;
    let e = expl.explain(x)?;
    let mut best: f64 = 0.0;
    for j in 0..cfg.n_samples {
        let moved = uniform_noise(x, -cfg.radius, cfg.radius, &mut rng::stream(cfg.seed, j as u64));
        best = best.max(dist(e.data(), expl.explain(&moved)?.data()));
    }
    Ok(best)
}

/// Pearson correlation, along an x-axis traversal, between the total
/// attribution and the target logit. HigherIsBetter.
pub fn continuity(
    expl: &dyn Explain,
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Score> {
    let steps = x_axis_traversal(x, modality, cfg.traversal_steps)?;
    let mut attr = Vec::with_capacity(steps.len());
    let mut logits = Vec::with_capacity(steps.len());
    for s in &steps {
        attr.push(expl.explain(s)?.sum());
        logits.push(model.logit(s, target)?);
    }
    Ok(Score::from_corr(pearson(&attr, &logits)))
}

fn gaussian_samples(x: &Tensor, cfg: &MetricConfig) -> Vec<Tensor> {
    (0..cfg.n_samples)
        .map(|j| gaussian_noise(x, cfg.stability_noise_sd, &mut rng::stream(cfg.seed, j as u64)))
        .collect()
}

/// Shared max-over-samples loop of the relative stabilities.
fn max_ratio(
    expl: &dyn Explain,
    x: &Tensor,
    samples: &[Tensor],
    eps: f64,
    eps_min: f64,
    denominator: impl Fn(&Tensor) -> Result<f64>,
) -> Result<f64> {
    let e = expl.explain(x)?;
    let mut best: f64 = 0.0;
    for s in samples {
        let num = relative_change(e.data(), expl.explain(s)?.data(), eps);
        best = best.max(num / denominator(s)?.max(eps_min));
    }
    Ok(best)
}

/// Relative input stability over explicit perturbed inputs.
pub fn relative_input_stability_from_samples(
    expl: &dyn Explain,
    x: &Tensor,
    samples: &[Tensor],
    eps: f64,
    eps_min: f64,
) -> Result<f64> {
    max_ratio(expl, x, samples, eps, eps_min, |s| Ok(relative_change(x.data(), s.data(), eps)))
}

/// Relative output stability over explicit perturbed inputs; the
/// denominator is the logit-vector distance.
pub fn relative_output_stability_from_samples(
    expl: &dyn Explain,
    model: &dyn ModelOracle,
    x: &Tensor,
    samples: &[Tensor],
    eps: f64,
    eps_min: f64,
) -> Result<f64> {
    let fx = model.predict(x)?;
    max_ratio(expl, x, samples, eps, eps_min, |s| Ok(dist(&fx, &model.predict(s)?)))
}

/// Relative representation stability over explicit perturbed inputs.
pub fn relative_representation_stability_from_samples(
    expl: &dyn Explain,
    model: &dyn ModelOracle,
    x: &Tensor,
    samples: &[Tensor],
    eps: f64,
    eps_min: f64,
) -> Result<f64> {
    let hx = model.representation(x)?;
    max_ratio(expl, x, samples, eps, eps_min, |s| Ok(relative_change(&hx, &model.representation(s)?, eps)))
}

/// Largest relative explanation change over relative input change under
/// Gaussian noise. LowerIsBetter.
pub fn relative_input_stability(expl: &dyn Explain, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    check_samples(cfg)?;
    relative_input_stability_from_samples(expl, x, &gaussian_samples(x, cfg), cfg.eps, cfg.eps_min)
}

/// Largest relative explanation change over logit change under Gaussian
/// noise. LowerIsBetter.
pub fn relative_output_stability(expl: &dyn Explain, model: &dyn ModelOracle, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    check_samples(cfg)?;
    relative_output_stability_from_samples(expl, model, x, &gaussian_samples(x, cfg), cfg.eps, cfg.eps_min)
}

/// Largest relative explanation change over relative change of the
/// penultimate representation under `U(0, rrs_noise_high)` noise.
/// LowerIsBetter.
pub fn relative_representation_stability(
    expl: &dyn Explain,
    model: &dyn ModelOracle,
    x: &Tensor,
    cfg: &MetricConfig,
) -> Result<f64> {
    check_samples(cfg)?;
    model.representation(x)?;
    let samples: Vec<Tensor> = (0..cfg.n_samples)
        .map(|j| uniform_noise(x, 0.0, cfg.rrs_noise_high, &mut rng::stream(cfg.seed, j as u64)))
        .collect();
    relative_representation_stability_from_samples(expl, model, x, &samples, cfg.eps, cfg.eps_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xai::testing::Linear;

    fn identity(x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }

    fn double(x: &Tensor) -> Result<Tensor> {
        Ok(x.map(|v| 2.0 * v))
    }

    fn constant(x: &Tensor) -> Result<Tensor> {
        Ok(Tensor::filled(x.shape(), 0.5))
    }

    fn input() -> Tensor {
        Tensor::new(vec![4, 4, 1], (0..16).map(|i| 0.5 + (i as f64 * 0.7).sin() * 0.3).collect()).unwrap()
    }

    #[test]
    fn lipschitz_closed_forms() {
        let x = input();
        let cfg = MetricConfig::default();
        assert_eq!(local_lipschitz_estimate(&constant, &x, &cfg).unwrap(), 0.0);
        assert!((local_lipschitz_estimate(&identity, &x, &cfg).unwrap() - 1.0).abs() < 1e-9);
        assert!((local_lipschitz_estimate(&double, &x, &cfg).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sensitivity_bounds_and_scaling() {
        let x = input();
        let cfg = MetricConfig::default();
        assert_eq!(max_sensitivity(&constant, &x, &cfg).unwrap(), 0.0);
        let id = max_sensitivity(&identity, &x, &cfg).unwrap();
        assert!(id <= cfg.radius * 4.0 + 1e-12 && id > 0.0);
        let many = MetricConfig {
            n_samples: 2000,
            radius: 0.1,
            ..MetricConfig::default()
        };
        // uniform noise in the cube approaches r sqrt(n / 3) in norm, the
        // corner r sqrt(n) only in the limit
        assert!(max_sensitivity(&identity, &x, &many).unwrap() > 0.1 * (16f64 / 3.0).sqrt());
        let two = max_sensitivity(&double, &x, &cfg).unwrap();
        assert!((two - 2.0 * id).abs() < 1e-12);
        assert_eq!(max_sensitivity(&identity, &x, &cfg).unwrap(), id);
    }

    #[test]
    fn more_samples_never_lower_max_scores() {
        let x = input();
        let wobble = |t: &Tensor| -> Result<Tensor> { Ok(t.map(|v| (5.0 * v).sin())) };
        for n in [8, 16, 32] {
            let a = MetricConfig {
                n_samples: n,
                ..MetricConfig::default()
            };
            let b = MetricConfig {
                n_samples: n * 2,
                ..MetricConfig::default()
            };
            assert!(max_sensitivity(&wobble, &x, &b).unwrap() >= max_sensitivity(&wobble, &x, &a).unwrap());
            assert!(local_lipschitz_estimate(&wobble, &x, &b).unwrap() >= local_lipschitz_estimate(&wobble, &x, &a).unwrap());
            assert!(relative_input_stability(&wobble, &x, &b).unwrap() >= relative_input_stability(&wobble, &x, &a).unwrap());
        }
    }

    #[test]
    fn continuity_of_proportional_explainer() {
        let m = Linear {
            w: vec![(0..16).map(|i| i as f64 * 0.1).collect()],
            b: vec![0.2],
        };
        let x = input();
        let cfg = MetricConfig::default();
        // spreads the logit uniformly over the map
        let spread = |t: &Tensor| -> Result<Tensor> {
            let l = m.logit(t, 0)?;
            Ok(Tensor::filled(t.shape(), l / 16.0))
        };
        let c = continuity(&spread, &m, &x, Modality::Image, 0, &cfg).unwrap();
        assert!((c.value - 1.0).abs() < 1e-9);
        assert!(continuity(&constant, &m, &x, Modality::Image, 0, &cfg).unwrap().degenerate);
    }

    #[test]
    fn relative_stabilities() {
        let x = input();
        let cfg = MetricConfig::default();
        let m = Linear {
            w: vec![vec![1.0; 16], vec![-1.0; 16]],
            b: vec![0.0, 0.0],
        };
        assert_eq!(relative_input_stability(&constant, &x, &cfg).unwrap(), 0.0);
        assert_eq!(relative_output_stability(&constant, &m, &x, &cfg).unwrap(), 0.0);
        // scaled copies: both relative changes are |1 - c| sqrt(n) up to eps
        let samples = vec![x.map(|v| 1.3 * v), x.map(|v| 0.8 * v)];
        let ris = relative_input_stability_from_samples(&identity, &x, &samples, 1e-12, 1e-6).unwrap();
        assert!((ris - 1.0).abs() < 1e-9);
        // a near-identical sample hits the eps_min clamp
        let near = vec![x.map(|v| v + 1e-12)];
        let clamped = relative_input_stability_from_samples(&double, &x, &near, 1e-6, 1e-6).unwrap();
        let num = relative_change(double(&x).unwrap().data(), double(&near[0]).unwrap().data(), 1e-6);
        assert!((clamped - num / 1e-6).abs() <= 1e-12 * clamped.max(1.0));
        assert!(clamped.is_finite());
    }

    #[test]
    fn doubling_leaves_relative_form_in_the_eps_limit() {
        let x = input();
        let samples: Vec<Tensor> = (0..8).map(|j| gaussian_noise(&x, 0.05, &mut rng::stream(3, j))).collect();
        let a = relative_input_stability_from_samples(&identity, &x, &samples, 1e-12, 1e-6).unwrap();
        let b = relative_input_stability_from_samples(&double, &x, &samples, 1e-12, 1e-6).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn rrs_needs_representation() {
        let m = Linear {
            w: vec![vec![1.0; 16]],
            b: vec![0.0],
        };
        let err = relative_representation_stability(&identity, &m, &input(), &MetricConfig::default());
        assert!(matches!(err, Err(Error::NoRepresentationCapability)));
        let net = crate::tinynet::Architecture::image_cnn(4, 4, 1, 2, 4).build(1).unwrap();
        let v = relative_representation_stability(&identity, &net, &input(), &MetricConfig::default()).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
}
