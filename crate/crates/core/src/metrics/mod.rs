//! The twenty evaluation metrics. Each maps a model, an input, its saliency
//! map and a configuration to one real score; ROAD and SUF need the whole
//! batch.
//!
//! Perturbation metrics work on *units*: a pixel (all channels together), a
//! voxel or a point. A unit's attribution is the sum of its map entries, and
//! removing a unit replaces all of its input entries.

mod complexity;
mod curve;
mod faithfulness;
mod robustness;

use serde::{Deserialize, Serialize};

use crate::data::{MetricId, Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::perturb::{self, PerturbSpec};
use crate::rng;
use crate::tensor::Tensor;
use crate::xai::Explain;

pub use complexity::{complexity, effective_complexity, sparseness};
pub use curve::{aoc, auc, Curve};
pub use faithfulness::{
    deletion, faithfulness_correlation, faithfulness_estimate, infidelity, insertion, irof, monotonicity_correlation,
    insertion_deletion_curve, irof_curve, irof_segments, pixel_flipping, pixel_flipping_curve, region_perturbation,
    region_perturbation_curve, road, sufficiency, DistanceKind, RoadResult,
};
pub use robustness::{
    continuity, local_lipschitz_estimate, max_sensitivity, relative_input_stability,
    relative_input_stability_from_samples, relative_output_stability, relative_output_stability_from_samples,
    relative_representation_stability, relative_representation_stability_from_samples,
};

/// A metric value. `degenerate` marks a score that was set to 0 because the
/// underlying statistic is undefined (zero variance, all-zero map).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    pub fn new(value: f64) -> Self {
        Score { value, degenerate: false }
    }

    pub fn degenerate() -> Self {
        Score {
            value: 0.0,
            degenerate: true,
        }
    }

    fn from_corr(c: Option<f64>) -> Self {
        c.map_or(Score::degenerate(), Score::new)
    }
}

/// Hyperparameters of every metric. Zero-valued counts mean "derive from the
/// input size" where noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// FC subset size in units; 0 means a tenth of the units.
    pub subset_size: usize,
    /// FC random subsets.
    pub n_runs: usize,
    /// FE and MC evaluate this many randomly chosen units; 0 means all.
    pub feature_samples: usize,
    /// Removal steps of the curve metrics (PF, RP, INS, DEL, ROAD).
    pub n_steps: usize,
    /// RP region edge over the spatial axes (point clouds always use 1).
    pub region_kernel: usize,
    /// IROF superpixels (grids) and clusters (point clouds).
    pub n_segments: usize,
    /// SUF neighbour count.
    pub suf_neighbors: usize,
    /// SUF map distance; `None` picks by modality.
    pub suf_distance: Option<DistanceKind>,
    /// Monte-Carlo draws of INF, MC and the robustness metrics.
    pub n_samples: usize,
    /// Perturbation scale of INF and MC.
    pub noise_sd: f64,
    /// Removal baseline override; `None` uses the per-metric default.
    pub perturb: Option<PerturbSpec>,
    /// LLE (L2) and MS (L-infinity) ball radius.
    pub radius: f64,
    /// CON traversal length.
    pub traversal_steps: usize,
    /// Gaussian noise of RIS and ROS.
    pub stability_noise_sd: f64,
    /// Upper bound of the uniform RRS noise.
    pub rrs_noise_high: f64,
    /// Element-wise denominator guard of the relative stabilities.
    pub eps: f64,
    /// Lower clamp of the relative-stability denominators.
    pub eps_min: f64,
    /// ECP threshold on normalized maps.
    pub ecp_epsilon: f64,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            subset_size: 0,
            n_runs: 64,
            feature_samples: 64,
            n_steps: 16,
            region_kernel: 2,
            n_segments: 16,
            suf_neighbors: 5,
            suf_distance: None,
            n_samples: 32,
            noise_sd: 0.1,
            perturb: None,
            radius: 0.1,
            traversal_steps: 8,
            stability_noise_sd: 0.05,
            rrs_noise_high: 0.05,
            eps: 1e-6,
            eps_min: 1e-6,
            ecp_epsilon: 0.1,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSpec(format!("metric config: {what}")));
        if self.n_steps < 2 || self.traversal_steps < 2 {
            return bad("steps must be at least 2");
        }
        if self.n_runs < 3 {
            return bad("FC needs at least 3 runs");
        }
        if self.n_samples < 1 || self.suf_neighbors < 1 || self.region_kernel < 1 || self.n_segments < 1 {
            return bad("counts must be at least 1");
        }
        if !(self.noise_sd >= 0.0 && self.radius > 0.0 && self.stability_noise_sd >= 0.0 && self.rrs_noise_high >= 0.0) {
            return bad("noise scales must be non-negative and the radius positive");
        }
        if !(self.eps > 0.0 && self.eps_min > 0.0) {
            return bad("eps and eps_min must be positive");
        }
        if let Some(p) = self.perturb {
            p.validate()?;
        }
        Ok(())
    }

    /// The removal baseline of `metric` for `modality`.
    pub fn perturb_for(&self, metric: MetricId, modality: Modality) -> PerturbSpec {
        if let Some(p) = self.perturb {
            return p;
        }
        match metric {
            MetricId::Ins | MetricId::Del => match modality {
                Modality::Image => PerturbSpec::GaussianBlur { sigma: 4.0 },
                _ => PerturbSpec::MeanNoise { sd: 0.1 },
            },
            MetricId::Road => PerturbSpec::LinearImputation { noise_sd: 0.1 },
            _ => PerturbSpec::BaselineValue { value: 0.0 },
        }
    }
}

/// Unit layout of an input: `n` units of `per` consecutive entries each, on
/// a spatial grid of shape `spatial`.
#[derive(Debug, Clone)]
pub(crate) struct Units {
    pub n: usize,
    pub per: usize,
    pub spatial: Vec<usize>,
    pub modality: Modality,
}

impl Units {
    pub fn of(x: &Tensor, modality: Modality) -> Result<Self> {
        modality.check_input_shape(x.shape())?;
        let s = x.shape();
        let (spatial, per) = match modality {
            Modality::Image => (s[..2].to_vec(), s[2]),
            Modality::Volume => (s.to_vec(), 1),
            Modality::PointCloud => (vec![s[0]], 3),
        };
        Ok(Units {
            n: spatial.iter().product(),
            per,
            spatial,
            modality,
        })
    }

    /// Per-unit attribution: channel sums for images, the map itself
    /// otherwise.
    pub fn scores(&self, map: &Tensor) -> Result<Vec<f64>> {
        let k = self.per / self.modality.entries_per_element();
        if map.len() != self.n * k {
            return Err(Error::ShapeMismatch {
                expected: vec![self.n * k],
                actual: map.shape().to_vec(),
            });
        }
        Ok(map.data().chunks(k).map(|c| c.iter().sum()).collect())
    }

    /// Per-map-element flags from per-unit flags.
    pub fn map_flags(&self, removed: &[bool]) -> Vec<bool> {
        let k = self.per / self.modality.entries_per_element();
        removed.iter().flat_map(|&r| std::iter::repeat_n(r, k)).collect()
    }
}

/// Unit indices by descending score; ties go to the lower index.
pub(crate) fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Produces inputs with a set of units removed according to a
/// [`PerturbSpec`].
pub(crate) struct Remover<'a> {
    x: &'a Tensor,
    units: &'a Units,
    spec: PerturbSpec,
    baseline: Option<Tensor>,
    seed: u64,
}

impl<'a> Remover<'a> {
    pub fn new(x: &'a Tensor, units: &'a Units, spec: PerturbSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let baseline = match spec {
            PerturbSpec::LinearImputation { .. } => None,
            _ => Some(spec.baseline(x, units.modality, seed)?),
        };
        Ok(Remover {
            x,
            units,
            spec,
            baseline,
            seed,
        })
    }


    pub fn remove(&self, removed: &[bool]) -> Result<Tensor> {
        match &self.baseline {
            Some(b) => Ok(mix(self.x, b, self.units.per, removed)),
            None => {
                let PerturbSpec::LinearImputation { noise_sd } = self.spec else {
                    unreachable!("baseline exists for every other spec")
                };
                perturb::noisy_linear_imputation(self.x, self.units.modality, &self.units.map_flags(removed), noise_sd, self.seed)
            }
        }
    }
}

/// `x` with the entries of flagged units taken from `other`.
pub(crate) fn mix(x: &Tensor, other: &Tensor, per: usize, flagged: &[bool]) -> Tensor {
    let mut out = x.clone();
    let o = other.data();
    for (u, chunk) in out.data_mut().chunks_mut(per).enumerate() {
        if flagged[u] {
            chunk.copy_from_slice(&o[u * per..(u + 1) * per]);
        }
    }
    out
}

/// `k` distinct indices from `0..n` (all of them in order when `k == 0` or
/// `k >= n`), by a seeded partial Fisher-Yates shuffle.
pub(crate) fn sample_indices(n: usize, k: usize, r: &mut rng::Rng) -> Vec<usize> {
    use rand::Rng as _;
    if k == 0 || k >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = r.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

pub(crate) fn target_probability(model: &dyn ModelOracle, x: &Tensor, target: usize) -> Result<f64> {
    model
        .probabilities(x)?
        .get(target)
        .copied()
        .ok_or_else(|| Error::InvalidSpec(format!("target {target} out of range")))
}

/// Everything a metric may need about one observation.
#[derive(Clone, Copy)]
pub struct Observation<'a> {
    pub model: &'a dyn ModelOracle,
    pub x: &'a Tensor,
    pub modality: Modality,
    /// Post-processed saliency values in map shape.
    pub map: &'a Tensor,
    /// Class the map explains (the model's prediction).
    pub target: usize,
    /// Ground-truth label (ROAD accuracy).
    pub label: usize,
    /// Required by the robustness metrics only.
    pub explainer: Option<&'a dyn Explain>,
}

impl Observation<'_> {
    fn explainer(&self) -> Result<&dyn Explain> {
        self.explainer
            .ok_or_else(|| Error::InvalidSpec("robustness metrics need an explanation function".into()))
    }
}

/// Scores one metric on one observation. ROAD and SUF are batch-level and
/// go through [`evaluate_batch`].
pub fn evaluate(metric: MetricId, obs: &Observation, cfg: &MetricConfig) -> Result<Score> {
    cfg.validate()?;
    let Observation {
        model,
        x,
        modality,
        map,
        target,
        ..
    } = *obs;
    let score = match metric {
        MetricId::Fc => faithfulness_correlation(model, x, modality, map, target, cfg)?,
        MetricId::Fe => faithfulness_estimate(model, x, modality, map, target, cfg)?,
        MetricId::Mc => monotonicity_correlation(model, x, modality, map, target, cfg)?,
        MetricId::Pf => Score::new(pixel_flipping(model, x, modality, map, target, cfg)?),
        MetricId::Rp => Score::new(region_perturbation(model, x, modality, map, target, cfg)?),
        MetricId::Ins => Score::new(insertion(model, x, modality, map, target, cfg)?),
        MetricId::Del => Score::new(deletion(model, x, modality, map, target, cfg)?),
        MetricId::Irof => Score::new(irof(model, x, modality, map, target, cfg)?),
        MetricId::Inf => Score::new(infidelity(model, x, modality, map, target, cfg)?),
        MetricId::Lle => Score::new(local_lipschitz_estimate(obs.explainer()?, x, cfg)?),
        MetricId::Ms => Score::new(max_sensitivity(obs.explainer()?, x, cfg)?),
        MetricId::Con => continuity(obs.explainer()?, model, x, modality, target, cfg)?,
        MetricId::Ris => Score::new(relative_input_stability(obs.explainer()?, x, cfg)?),
        MetricId::Ros => Score::new(relative_output_stability(obs.explainer()?, model, x, cfg)?),
        MetricId::Rrs => Score::new(relative_representation_stability(obs.explainer()?, model, x, cfg)?),
        MetricId::Sp => sparseness(map),
        MetricId::Cp => complexity(map),
        MetricId::Ecp => Score::new(effective_complexity(map, cfg.ecp_epsilon) as f64),
        MetricId::Road | MetricId::Suf => {
            return Err(Error::InvalidSpec(format!("{metric} is batch-level; use evaluate_batch")))
        }
    };
    Ok(score)
}

/// Scores one metric on every observation of a batch. Observation `i` runs
/// with seed `derive(cfg.seed, i)`, so scores do not depend on the executor.
pub fn evaluate_batch(metric: MetricId, batch: &[Observation], cfg: &MetricConfig, exec: Executor) -> Result<Vec<Score>> {
    cfg.validate()?;
    match metric {
        MetricId::Road => Ok(road(batch, cfg, exec)?.scores),
        MetricId::Suf => {
            let maps: Vec<&Tensor> = batch.iter().map(|o| o.map).collect();
            let labels: Vec<usize> = batch.iter().map(|o| o.target).collect();
            let modality = batch.first().map_or(Modality::Image, |o| o.modality);
            sufficiency(&maps, &labels, modality, cfg)
        }
        _ => exec.try_map_range(batch.len(), |i| {
            let c = MetricConfig {
                seed: rng::derive(cfg.seed, i as u64),
                ..cfg.clone()
            };
            evaluate(metric, &batch[i], &c)
        }),
    }
}
