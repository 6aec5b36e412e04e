//! Faithfulness metrics: does removing what the map calls important change
//! the model output accordingly?

use serde::{Deserialize, Serialize};

use super::curve::{aoc, auc, Curve};
use super::{mix, order_desc, sample_indices, target_probability, MetricConfig, Observation, Remover, Score, Units};
use crate::data::{MetricId, Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::perturb::{kmeans_points, slic, SlicConfig};
use crate::rng;
use crate::stats::{mean, pearson, spearman};
use crate::tensor::{unravel, Tensor};

/// Pearson correlation, over random unit subsets, between the subset's
/// attribution sum and the logit drop when the subset is removed.
pub fn faithfulness_correlation(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Score> {
    let units = Units::of(x, modality)?;
    let scores = units.scores(map)?;
    let size = if cfg.subset_size == 0 { (units.n / 10).max(1) } else { cfg.subset_size };
    if size >= units.n {
        return Err(Error::InvalidSpec(format!("subset size {size} must be below the unit count {}", units.n)));
    }
    let remover = Remover::new(x, &units, cfg.perturb_for(MetricId::Fc, modality), cfg.seed)?;
    let reference = model.logit(x, target)?;
    let mut sums = Vec::with_capacity(cfg.n_runs);
    let mut drops = Vec::with_capacity(cfg.n_runs);
    for run in 0..cfg.n_runs {
        let subset = sample_indices(units.n, size, &mut rng::stream(cfg.seed, run as u64));
        let mut flags = vec![false; units.n];
        for &u in &subset {
            flags[u] = true;
        }
        sums.push(subset.iter().map(|&u| scores[u]).sum());
        drops.push(reference - model.logit(&remover.remove(&flags)?, target)?);
    }
    Ok(Score::from_corr(pearson(&sums, &drops)))
}

/// Pearson correlation between single-unit attribution and the logit drop
/// when only that unit is removed, over a seeded sample of units.
pub fn faithfulness_estimate(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Score> {
    let units = Units::of(x, modality)?;
    let scores = units.scores(map)?;
    let remover = Remover::new(x, &units, cfg.perturb_for(MetricId::Fe, modality), cfg.seed)?;
    let reference = model.logit(x, target)?;
    let chosen = sample_indices(units.n, cfg.feature_samples, &mut rng::stream(cfg.seed, 0));
    let mut attr = Vec::with_capacity(chosen.len());
    let mut drops = Vec::with_capacity(chosen.len());
    for &u in &chosen {
        let mut flags = vec![false; units.n];
        flags[u] = true;
        attr.push(scores[u]);
        drops.push(reference - model.logit(&remover.remove(&flags)?, target)?);
    }
    Ok(Score::from_corr(pearson(&attr, &drops)))
}

/// Spearman correlation between |attribution| and the mean squared logit
/// change when one unit at a time receives Gaussian noise.
pub fn monotonicity_correlation(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Score> {
    if cfg.n_samples < 2 {
        return Err(Error::InvalidSpec("MC needs at least 2 noise samples per unit".into()));
    }
    let units = Units::of(x, modality)?;
    let scores = units.scores(map)?;
    let reference = model.logit(x, target)?;
    let chosen = sample_indices(units.n, cfg.feature_samples, &mut rng::stream(cfg.seed, 0));
    let mut attr = Vec::with_capacity(chosen.len());
    let mut effect = Vec::with_capacity(chosen.len());
    for &u in &chosen {
        let mut r = rng::stream(rng::derive(cfg.seed, u as u64), 1);
        let mut total = 0.0;
        for _ in 0..cfg.n_samples {
            let mut noisy = x.clone();
            for v in &mut noisy.data_mut()[u * units.per..(u + 1) * units.per] {
                *v += cfg.noise_sd * rng::normal(&mut r);
            }
            total += (reference - model.logit(&noisy, target)?).powi(2);
        }
        attr.push(scores[u].abs());
        effect.push(total / cfg.n_samples as f64);
    }
    Ok(Score::from_corr(spearman(&attr, &effect)))
}

/// Target probability while groups of units are removed in order (or, with
/// `insert`, restored into the fully perturbed input). Step `k` of `K`
/// covers the first `round(k G / K)` groups; xs are unit fractions.
fn group_curve(
    model: &dyn ModelOracle,
    units: &Units,
    groups: &[Vec<usize>],
    n_steps: usize,
    remover: &Remover,
    target: usize,
    insert: bool,
) -> Result<Curve> {
    let g = groups.len();
    let k_steps = n_steps.min(g);
    let mut xs = Vec::with_capacity(k_steps + 1);
    let mut ys = Vec::with_capacity(k_steps + 1);
    let mut flags = vec![false; units.n];
    let mut done = 0;
    let mut touched = 0;
    for k in 0..=k_steps {
        let upto = ((k * g) as f64 / k_steps as f64).round() as usize;
        for group in &groups[done..upto] {
            for &u in group {
                flags[u] = true;
                touched += 1;
            }
        }
        done = upto;
        let perturbed = if insert {
            let inverse: Vec<bool> = flags.iter().map(|f| !f).collect();
            remover.remove(&inverse)?
        } else {
            remover.remove(&flags)?
        };
        xs.push(touched as f64 / units.n as f64);
        ys.push(target_probability(model, &perturbed, target)?);
    }
    Curve::new(xs, ys)
}

fn singletons(order: Vec<usize>) -> Vec<Vec<usize>> {
    order.into_iter().map(|u| vec![u]).collect()
}

/// Probability curve of [`pixel_flipping`].
pub fn pixel_flipping_curve(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Curve> {
    let units = Units::of(x, modality)?;
    let order = order_desc(&units.scores(map)?);
    let remover = Remover::new(x, &units, cfg.perturb_for(MetricId::Pf, modality), cfg.seed)?;
    group_curve(model, &units, &singletons(order), cfg.n_steps, &remover, target, false)
}

/// AUC of the target probability while units are set to the baseline in
/// descending attribution order. LowerIsBetter.
pub fn pixel_flipping(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    auc(&pixel_flipping_curve(model, x, modality, map, target, cfg)?)
}

/// Non-overlapping blocks of edge `kernel` tiling the unit grid (ragged at
/// the far edges), numbered row-major over the block grid.
fn regions(units: &Units, kernel: usize) -> Vec<Vec<usize>> {
    let counts: Vec<usize> = units.spatial.iter().map(|d| d.div_ceil(kernel)).collect();
    let mut out = vec![Vec::new(); counts.iter().product()];
    for u in 0..units.n {
        let idx = unravel(u, &units.spatial);
        let r = idx.iter().zip(&counts).fold(0, |acc, (i, c)| acc * c + i / kernel);
        out[r].push(u);
    }
    out
}

/// Probability curve of [`region_perturbation`] with its region order.
pub fn region_perturbation_curve(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<(Curve, Vec<Vec<usize>>)> {
    let units = Units::of(x, modality)?;
    let kernel = if modality == Modality::PointCloud { 1 } else { cfg.region_kernel };
    if units.spatial.iter().any(|&d| d < kernel) {
        return Err(Error::KernelTooLarge {
            kernel: vec![kernel; units.spatial.len()],
            shape: x.shape().to_vec(),
        });
    }
    let scores = units.scores(map)?;
    let regs = regions(&units, kernel);
    let sums: Vec<f64> = regs.iter().map(|r| r.iter().map(|&u| scores[u]).sum()).collect();
    let ordered: Vec<Vec<usize>> = order_desc(&sums).into_iter().map(|i| regs[i].clone()).collect();
    let remover = Remover::new(x, &units, cfg.perturb_for(MetricId::Rp, modality), cfg.seed)?;
    let curve = group_curve(model, &units, &ordered, cfg.n_steps, &remover, target, false)?;
    Ok((curve, ordered))
}

/// Like [`pixel_flipping`] but removes kernel-sized regions ordered by their
/// attribution sum (single points for clouds). LowerIsBetter.
pub fn region_perturbation(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    auc(&region_perturbation_curve(model, x, modality, map, target, cfg)?.0)
}

/// Probability curve of [`insertion`] (`insert`) or [`deletion`].
pub fn insertion_deletion_curve(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
    insert: bool,
) -> Result<Curve> {
    let units = Units::of(x, modality)?;
    let order = order_desc(&units.scores(map)?);
    let id = if insert { MetricId::Ins } else { MetricId::Del };
    let remover = Remover::new(x, &units, cfg.perturb_for(id, modality), cfg.seed)?;
    group_curve(model, &units, &singletons(order), cfg.n_steps, &remover, target, insert)
}

/// AUC of the target probability as units are inserted, most attributed
/// first, into a blurred (images) or noise (volumes, clouds) baseline.
/// HigherIsBetter.
pub fn insertion(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    auc(&insertion_deletion_curve(model, x, modality, map, target, cfg, true)?)
}

/// AUC of the target probability as units are replaced by the same baseline
/// as [`insertion`]. LowerIsBetter.
pub fn deletion(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    auc(&insertion_deletion_curve(model, x, modality, map, target, cfg, false)?)
}

/// Superpixels (SLIC) for grids, k-means clusters for clouds, as unit
/// groups.
pub fn irof_segments(x: &Tensor, modality: Modality, cfg: &MetricConfig) -> Result<Vec<Vec<usize>>> {
    let units = Units::of(x, modality)?;
    let seg = match modality {
        Modality::PointCloud => kmeans_points(x, cfg.n_segments, 100, cfg.seed)?,
        _ => slic(x, modality, &SlicConfig::default_for(modality, cfg.n_segments))?,
    };
    // image labels are per entry, identical across a pixel's channels
    let k = seg.assignment.len() / units.n;
    let mut groups = vec![Vec::new(); seg.n_segments];
    for u in 0..units.n {
        groups[seg.assignment[u * k]].push(u);
    }
    Ok(groups)
}

/// Probability curve of [`irof`], normalized by the unperturbed
/// probability.
pub fn irof_curve(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<Curve> {
    let units = Units::of(x, modality)?;
    let scores = units.scores(map)?;
    let k = units.per / modality.entries_per_element();
    let groups = irof_segments(x, modality, cfg)?;
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&u| scores[u]).sum::<f64>() / (g.len() * k) as f64)
        .collect();
    // every segment is replaced by its own per-channel mean
    let mut filled = x.clone();
    for g in &groups {
        for c in 0..units.per {
            let m = g.iter().map(|&u| x.data()[u * units.per + c]).sum::<f64>() / g.len() as f64;
            for &u in g {
                filled.data_mut()[u * units.per + c] = m;
            }
        }
    }
    let p0 = target_probability(model, x, target)?;
    if p0 <= 0.0 {
        return Err(Error::DegenerateCurve("target probability is zero".into()));
    }
    let mut flags = vec![false; units.n];
    let mut xs = vec![0.0];
    let mut ys = vec![1.0];
    let mut removed = 0;
    for s in order_desc(&means) {
        for &u in &groups[s] {
            flags[u] = true;
        }
        removed += groups[s].len();
        xs.push(removed as f64 / units.n as f64);
        ys.push(target_probability(model, &mix(x, &filled, units.per, &flags), target)? / p0);
    }
    Curve::new(xs, ys)
}

/// Area over the normalized probability curve as segments are replaced by
/// their mean, highest mean attribution first. HigherIsBetter.
pub fn irof(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    aoc(&irof_curve(model, x, modality, map, target, cfg)?)
}

/// Batch outcome of [`road`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoadResult {
    /// Per-observation AUC of the 0/1 correctness curve.
    pub scores: Vec<Score>,
    /// Batch accuracy per removal fraction.
    pub accuracy: Curve,
    /// AUC of `accuracy`, equal to the mean of `scores`.
    pub auc: f64,
}

/// Batch accuracy while the most attributed units are replaced by noisy
/// linear imputations. LowerIsBetter.
pub fn road(batch: &[Observation], cfg: &MetricConfig, exec: Executor) -> Result<RoadResult> {
    if batch.len() < 2 {
        return Err(Error::BatchTooSmall { size: batch.len(), min: 2 });
    }
    let curves = exec.try_map_range(batch.len(), |i| {
        let o = &batch[i];
        let units = Units::of(o.x, o.modality)?;
        let order = order_desc(&units.scores(o.map)?);
        let seed = rng::derive(cfg.seed, i as u64);
        let remover = Remover::new(o.x, &units, cfg.perturb_for(MetricId::Road, o.modality), seed)?;
        let k_steps = cfg.n_steps.min(units.n);
        let mut flags = vec![false; units.n];
        let mut done = 0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..=k_steps {
            let upto = ((k * units.n) as f64 / k_steps as f64).round() as usize;
            for &u in &order[done..upto] {
                flags[u] = true;
            }
            done = upto;
            let perturbed = remover.remove(&flags)?;
            xs.push(upto as f64 / units.n as f64);
            ys.push(if o.model.predicted_class(&perturbed)? == o.label { 1.0 } else { 0.0 });
        }
        Curve::new(xs, ys)
    })?;
    let xs = curves[0].xs.clone();
    if curves.iter().any(|c| c.xs != xs) {
        return Err(Error::InvalidSpec("ROAD batch mixes input sizes".into()));
    }
    let ys = (0..xs.len())
        .map(|k| mean(&curves.iter().map(|c| c.ys[k]).collect::<Vec<_>>()))
        .collect();
    let accuracy = Curve::new(xs, ys)?;
    let scores = curves.iter().map(|c| auc(c).map(Score::new)).collect::<Result<Vec<_>>>()?;
    Ok(RoadResult {
        auc: auc(&accuracy)?,
        scores,
        accuracy,
    })
}

/// Distance between saliency maps for [`sufficiency`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Euclidean after dividing every entry by its variance across the
    /// batch; constant entries are skipped.
    StandardizedEuclidean,
    SquaredEuclidean,
}

impl DistanceKind {
    pub fn default_for(modality: Modality) -> Self {
        match modality {
            Modality::Volume => DistanceKind::SquaredEuclidean,
            _ => DistanceKind::StandardizedEuclidean,
        }
    }
}

/// Per observation, the fraction of its `m` nearest maps (excluding itself,
/// ties by index) whose predicted label matches its own. HigherIsBetter.
pub fn sufficiency(maps: &[&Tensor], labels: &[usize], modality: Modality, cfg: &MetricConfig) -> Result<Vec<Score>> {
    const MIN_BATCH: usize = 10;
    let n = maps.len();
    if n < MIN_BATCH {
        return Err(Error::BatchTooSmall { size: n, min: MIN_BATCH });
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    let len = maps[0].len();
    if let Some(bad) = maps.iter().find(|m| m.len() != len) {
        return Err(Error::ShapeMismatch {
            expected: maps[0].shape().to_vec(),
            actual: bad.shape().to_vec(),
        });
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() * 5 > n {
        log::warn!(
            "sufficiency: {} classes in a batch of {n}; few neighbours can share a label",
            classes.len()
        );
    }
    let kind = cfg.suf_distance.unwrap_or_else(|| DistanceKind::default_for(modality));
    let weights: Vec<f64> = match kind {
        DistanceKind::SquaredEuclidean => vec![1.0; len],
        DistanceKind::StandardizedEuclidean => (0..len)
            .map(|e| {
                let col: Vec<f64> = maps.iter().map(|m| m.data()[e]).collect();
                let mu = mean(&col);
                let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
                if var > 0.0 {
                    1.0 / var
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let dist = |a: &Tensor, b: &Tensor| -> f64 {
        let s: f64 = a.data().iter().zip(b.data()).zip(&weights).map(|((p, q), w)| w * (p - q).powi(2)).sum();
        match kind {
            DistanceKind::SquaredEuclidean => s,
            DistanceKind::StandardizedEuclidean => s.sqrt(),
        }
    };
    let m = cfg.suf_neighbors.min(n - 1);
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(maps[i], maps[j]), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let same = others[..m].iter().filter(|(_, j)| labels[*j] == labels[i]).count();
            Score::new(same as f64 / m as f64)
        })
        .collect())
}

/// Mean over Gaussian perturbations `I` of
/// `(sum_i I_i map_i - (f(x) - f(x - I)))^2` on the target logit.
/// LowerIsBetter.
pub fn infidelity(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    map: &Tensor,
    target: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    if cfg.n_samples < 16 {
        return Err(Error::InvalidSpec("INF needs at least 16 samples".into()));
    }
    modality.check_input_shape(x.shape())?;
    let k = modality.entries_per_element();
    if map.len() * k != x.len() {
        return Err(Error::ShapeMismatch {
            expected: modality.map_shape(x.shape()),
            actual: map.shape().to_vec(),
        });
    }
    let reference = model.logit(x, target)?;
    let mut total = 0.0;
    for j in 0..cfg.n_samples {
        let noise = rng::normals(&mut rng::stream(cfg.seed, j as u64), x.len(), cfg.noise_sd);
        let dot: f64 = noise.iter().enumerate().map(|(e, v)| v * map.data()[e / k]).sum();
        let shifted = Tensor::new(x.shape().to_vec(), x.data().iter().zip(&noise).map(|(a, b)| a - b).collect())?;
        total += (dot - (reference - model.logit(&shifted, target)?)).powi(2);
    }
    Ok(total / cfg.n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::PerturbSpec;
    use crate::xai::testing::{Constant, Linear};

    fn linear_image(seed: u64) -> (Linear, Tensor) {
        let n = 4 * 4 * 3;
        let mut r = rng::stream(seed, 9);
        let w = rng::normals(&mut r, n, 1.0);
        let x = Tensor::new(vec![4, 4, 3], rng::normals(&mut r, n, 1.0)).unwrap();
        (
            Linear {
                w: vec![w, vec![0.0; n]],
                b: vec![0.0, 0.0],
            },
            x,
        )
    }

    fn ixg(m: &Linear, x: &Tensor) -> Tensor {
        Tensor::new(x.shape().to_vec(), m.w[0].iter().zip(x.data()).map(|(a, b)| a * b).collect()).unwrap()
    }

    /// Model whose logit is the input mean; one class, probability from a
    /// second constant logit.
    struct MeanModel;

    impl ModelOracle for MeanModel {
        fn num_classes(&self) -> usize {
            2
        }

        fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
            Ok(vec![x.mean(), 0.0])
        }
    }

    #[test]
    fn fc_and_fe_are_one_for_linear_ixg() {
        let (m, x) = linear_image(1);
        let a = ixg(&m, &x);
        let cfg = MetricConfig::default();
        let fc = faithfulness_correlation(&m, &x, Modality::Image, &a, 0, &cfg).unwrap();
        assert!((fc.value - 1.0).abs() < 1e-9, "{fc:?}");
        let fe = faithfulness_estimate(&m, &x, Modality::Image, &a, 0, &cfg).unwrap();
        assert!((fe.value - 1.0).abs() < 1e-9);
        // the sign-flipped map is anti-correlated
        let flipped = a.map(|v| -v);
        assert!(faithfulness_estimate(&m, &x, Modality::Image, &flipped, 0, &cfg).unwrap().value <= 0.0);
    }

    #[test]
    fn constant_model_or_map_is_degenerate() {
        let x = Tensor::filled(&[4, 4, 1], 0.5);
        let a = Tensor::new(vec![4, 4, 1], (0..16).map(|i| i as f64).collect()).unwrap();
        let cfg = MetricConfig::default();
        let fc = faithfulness_correlation(&Constant, &x, Modality::Image, &a, 0, &cfg).unwrap();
        assert_eq!(fc, Score::degenerate());
        let (m, x) = linear_image(2);
        let flat = Tensor::filled(x.shape(), 0.3);
        assert!(faithfulness_estimate(&m, &x, Modality::Image, &flat, 0, &cfg).unwrap().degenerate);
    }

    #[test]
    fn mc_rewards_zero_weight_on_ignored_units() {
        // a point model that reads only the first coordinate of points 0..4
        let n = 8;
        let mut w = vec![0.0; n * 3];
        for p in 0..4 {
            w[p * 3] = (p + 1) as f64;
        }
        let m = Linear {
            w: vec![w],
            b: vec![0.0],
        };
        let x = Tensor::filled(&[n, 3], 0.2);
        let cfg = MetricConfig::default();
        let aligned = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let wrong = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0]);
        let good = monotonicity_correlation(&m, &x, Modality::PointCloud, &aligned, 0, &cfg).unwrap().value;
        let bad = monotonicity_correlation(&m, &x, Modality::PointCloud, &wrong, 0, &cfg).unwrap().value;
        assert!(good > bad && good > 0.9, "{good} {bad}");
    }

    #[test]
    fn pf_mean_model_closed_form() {
        // f = mean(x) on a 4x4 ones image with baseline 0: after removing j of
        // 16 pixels the logit is 1 - j/16
        let x = Tensor::filled(&[4, 4, 1], 1.0);
        let map = Tensor::filled(&[4, 4, 1], 1.0);
        let cfg = MetricConfig {
            n_steps: 4,
            ..MetricConfig::default()
        };
        let c = pixel_flipping_curve(&MeanModel, &x, Modality::Image, &map, 0, &cfg).unwrap();
        assert_eq!(c.xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let p = |l: f64| 1.0 / (1.0 + (-l).exp());
        for (k, y) in c.ys.iter().enumerate() {
            assert!((y - p(1.0 - k as f64 / 4.0)).abs() < 1e-12);
        }
        let expected: f64 = (0..4).map(|k| 0.25 * (c.ys[k] + c.ys[k + 1]) / 2.0).sum();
        assert!((pixel_flipping(&MeanModel, &x, Modality::Image, &map, 0, &cfg).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn rp_kernel_one_equals_pf() {
        let net = crate::tinynet::Architecture::image_cnn(8, 8, 3, 4, 8).build(3).unwrap();
        let mut r = rng::stream(5, 0);
        for _ in 0..5 {
            let x = Tensor::new(vec![8, 8, 3], rng::normals(&mut r, 192, 1.0)).unwrap();
            let map = Tensor::new(vec![8, 8, 3], rng::normals(&mut r, 192, 1.0).iter().map(|v| v.abs()).collect()).unwrap();
            let cfg = MetricConfig {
                region_kernel: 1,
                ..MetricConfig::default()
            };
            let pf = pixel_flipping(&net, &x, Modality::Image, &map, 1, &cfg).unwrap();
            let rp = region_perturbation(&net, &x, Modality::Image, &map, 1, &cfg).unwrap();
            assert!((pf - rp).abs() <= 1e-12);
        }
    }

    #[test]
    fn rp_orders_regions_by_sum_and_checks_kernel() {
        let x = Tensor::filled(&[4, 4, 1], 1.0);
        let map = Tensor::new(vec![4, 4, 1], (0..16).map(|i| ((i * 5) % 16) as f64).collect()).unwrap();
        let cfg = MetricConfig::default();
        let (_, order) = region_perturbation_curve(&MeanModel, &x, Modality::Image, &map, 0, &cfg).unwrap();
        let sums: Vec<f64> = order.iter().map(|r| r.iter().map(|&u| map.data()[u]).sum()).collect();
        assert!(sums.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(order.len(), 4);
        let whole = MetricConfig {
            region_kernel: 4,
            ..MetricConfig::default()
        };
        let (c, _) = region_perturbation_curve(&MeanModel, &x, Modality::Image, &map, 0, &whole).unwrap();
        assert_eq!(c.xs, vec![0.0, 1.0]);
        let big = MetricConfig {
            region_kernel: 5,
            ..MetricConfig::default()
        };
        assert!(matches!(
            region_perturbation(&MeanModel, &x, Modality::Image, &map, 0, &big),
            Err(Error::KernelTooLarge { .. })
        ));
    }

    #[test]
    fn insertion_and_deletion_share_endpoints() {
        let (m, x) = linear_image(4);
        let a = ixg(&m, &x).map(f64::abs);
        let cfg = MetricConfig::default();
        let ins = insertion_deletion_curve(&m, &x, Modality::Image, &a, 0, &cfg, true).unwrap();
        let del = insertion_deletion_curve(&m, &x, Modality::Image, &a, 0, &cfg, false).unwrap();
        let p0 = target_probability(&m, &x, 0).unwrap();
        let blurred = cfg.perturb_for(MetricId::Ins, Modality::Image).baseline(&x, Modality::Image, 0).unwrap();
        let pb = target_probability(&m, &blurred, 0).unwrap();
        assert!((ins.ys[0] - pb).abs() < 1e-15 && (del.ys[del.ys.len() - 1] - pb).abs() < 1e-15);
        assert!((ins.ys[ins.ys.len() - 1] - p0).abs() < 1e-15 && (del.ys[0] - p0).abs() < 1e-15);
        let one = MetricConfig {
            n_steps: 2,
            ..MetricConfig::default()
        };
        assert_eq!(insertion_deletion_curve(&m, &x, Modality::Image, &a, 0, &one, true).unwrap().ys.len(), 3);
    }

    #[test]
    fn irof_two_segment_model() {
        // top half textured around 1 and decisive, bottom half flat and
        // ignored; mean replacement erases exactly the texture the model reads
        struct Texture;
        impl ModelOracle for Texture {
            fn num_classes(&self) -> usize {
                2
            }
            fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
                let energy: f64 = x.data()[..32].iter().map(|v| (v - 1.0).powi(2)).sum();
                Ok(vec![50.0 * energy - 8.0, 0.0])
            }
        }
        let data: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 + if i % 2 == 0 { 0.1 } else { -0.1 } } else { 0.0 }).collect();
        let x = Tensor::new(vec![8, 8, 1], data).unwrap();
        let cfg = MetricConfig {
            n_segments: 2,
            ..MetricConfig::default()
        };
        let good = Tensor::new(vec![8, 8, 1], (0..64).map(|i| if i < 32 { 1.0 } else { 0.0 }).collect()).unwrap();
        let bad = good.map(|v| 1.0 - v);
        let c = irof_curve(&Texture, &x, Modality::Image, &good, 0, &cfg).unwrap();
        assert_eq!(c.xs, vec![0.0, 0.5, 1.0]);
        // AOC is 1 - AUC of the normalized curve
        let s_good = irof(&Texture, &x, Modality::Image, &good, 0, &cfg).unwrap();
        assert_eq!(s_good, 1.0 - auc(&c).unwrap());
        let s_bad = irof(&Texture, &x, Modality::Image, &bad, 0, &cfg).unwrap();
        assert!(s_good > 0.7 && s_bad < 0.3, "{s_good} {s_bad}");
        // a constant map falls back to segment-id order
        let flat = Tensor::filled(&[8, 8, 1], 0.5);
        assert!(irof(&Texture, &x, Modality::Image, &flat, 0, &cfg).is_ok());
    }

    #[test]
    fn road_endpoints() {
        let (m, x) = linear_image(6);
        let target = m.predicted_class(&x).unwrap();
        let a = ixg(&m, &x).map(f64::abs);
        let obs = Observation {
            model: &m,
            x: &x,
            modality: Modality::Image,
            map: &a,
            target,
            label: target,
            explainer: None,
        };
        let res = road(&[obs, obs], &MetricConfig::default(), Executor::default()).unwrap();
        assert_eq!(res.accuracy.ys[0], 1.0);
        assert_eq!(res.scores.len(), 2);
        assert!((res.auc - mean(&res.scores.iter().map(|s| s.value).collect::<Vec<_>>())).abs() < 1e-12);
        assert!(matches!(
            road(&[obs], &MetricConfig::default(), Executor::default()),
            Err(Error::BatchTooSmall { .. })
        ));
    }

    #[test]
    fn sufficiency_identities() {
        let maps: Vec<Tensor> = (0..12).map(|i| Tensor::from_vec(vec![i as f64, (i * i) as f64])).collect();
        let refs: Vec<&Tensor> = maps.iter().collect();
        let same = vec![2; 12];
        let cfg = MetricConfig::default();
        assert!(sufficiency(&refs, &same, Modality::PointCloud, &cfg).unwrap().iter().all(|s| s.value == 1.0));
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let all = MetricConfig {
            suf_neighbors: 11,
            ..MetricConfig::default()
        };
        for s in sufficiency(&refs, &labels, Modality::Volume, &all).unwrap() {
            assert!((s.value - 3.0 / 11.0).abs() < 1e-12);
        }
        assert!(matches!(
            sufficiency(&refs[..9], &labels[..9], Modality::Image, &cfg),
            Err(Error::BatchTooSmall { .. })
        ));
    }

    #[test]
    fn sufficiency_random_labels_near_chance() {
        let mut r = rng::stream(11, 0);
        let n = 400;
        let maps: Vec<Tensor> = (0..n).map(|_| Tensor::from_vec(rng::normals(&mut r, 6, 1.0))).collect();
        let refs: Vec<&Tensor> = maps.iter().collect();
        use rand::Rng as _;
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let s = sufficiency(&refs, &labels, Modality::Image, &MetricConfig::default()).unwrap();
        let avg = mean(&s.iter().map(|s| s.value).collect::<Vec<_>>());
        // sd of the mean of 400 means of 5 Bernoulli(1/4) draws is about 0.01
        assert!((avg - 0.25).abs() < 0.05, "{avg}");
    }

    #[test]
    fn infidelity_identities() {
        let (m, x) = linear_image(7);
        let w = Tensor::new(x.shape().to_vec(), m.w[0].clone()).unwrap();
        let cfg = MetricConfig::default();
        assert!(infidelity(&m, &x, Modality::Image, &w, 0, &cfg).unwrap() < 1e-20);
        let zero = Tensor::zeros(x.shape());
        let direct: f64 = (0..cfg.n_samples)
            .map(|j| {
                let n = rng::normals(&mut rng::stream(cfg.seed, j as u64), x.len(), cfg.noise_sd);
                n.iter().zip(&m.w[0]).map(|(a, b)| a * b).sum::<f64>().powi(2)
            })
            .sum::<f64>()
            / cfg.n_samples as f64;
        let got = infidelity(&m, &x, Modality::Image, &zero, 0, &cfg).unwrap();
        assert!((got - direct).abs() < 1e-12 * direct && got > 0.0);
    }

    #[test]
    fn infidelity_vanishes_with_noise_for_smooth_models() {
        // f = sum x^2 with its exact gradient map: the residual is second order
        struct Square;
        impl ModelOracle for Square {
            fn num_classes(&self) -> usize {
                1
            }
            fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
                Ok(vec![x.data().iter().map(|v| v * v).sum()])
            }
        }
        let x = Tensor::new(vec![3, 3, 3], (0..27).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let grad = x.map(|v| 2.0 * v);
        let at = |sd: f64| {
            let cfg = MetricConfig {
                noise_sd: sd,
                ..MetricConfig::default()
            };
            infidelity(&Square, &x, Modality::Volume, &grad, 0, &cfg).unwrap()
        };
        let (big, small) = (at(0.1), at(0.01));
        assert!(small < big / 1000.0, "{big} {small}");
    }

    #[test]
    fn imputation_baseline_runs_through_remover() {
        let (_, x) = linear_image(8);
        let units = Units::of(&x, Modality::Image).unwrap();
        let r = Remover::new(&x, &units, PerturbSpec::LinearImputation { noise_sd: 0.0 }, 0).unwrap();
        let mut flags = vec![false; 16];
        flags[5] = true;
        let y = r.remove(&flags).unwrap();
        assert_eq!(y.data()[..15], x.data()[..15]);
        assert_ne!(y.data()[15], x.data()[15]);
    }
}
