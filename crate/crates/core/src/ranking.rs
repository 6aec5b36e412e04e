//! From standardized scores to method rankings: per-cell medians over
//! observations, means over (dataset, architecture) combinations, fractional
//! per-metric ranks and per-method summaries with agreement flags.

use serde::{Deserialize, Serialize};

use crate::data::{Criterion, MetricAxis, Orientation, ScoreTensor};
use crate::error::{Error, Result};
use crate::stats::{average_ranks, mean, median, quantile, sd_sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// One ranking per (dataset, architecture) combination.
    FullRanking,
    /// Medians averaged over every combination of the modality first.
    AggregatedRanking,
}

/// Which `(dataset, architecture)` cells feed one ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationPlan {
    pub mode: AggregationMode,
    pub combos: Vec<(usize, usize)>,
    pub n_obs: usize,
}

impl AggregationPlan {
    pub fn full(tensor: &ScoreTensor, dataset: usize, architecture: usize) -> Self {
        AggregationPlan {
            mode: AggregationMode::FullRanking,
            combos: vec![(dataset, architecture)],
            n_obs: tensor.n_obs,
        }
    }

    pub fn aggregated(tensor: &ScoreTensor) -> Self {
        let [nd, na, ..] = tensor.shape();
        AggregationPlan {
            mode: AggregationMode::AggregatedRanking,
            combos: (0..nd).flat_map(|d| (0..na).map(move |a| (d, a))).collect(),
            n_obs: tensor.n_obs,
        }
    }
}

/// Median over the present observations of one cell.
pub fn cell_median(tensor: &ScoreTensor, d: usize, a: usize, f: usize, e: usize) -> Option<f64> {
    let present: Vec<f64> = tensor.cell(d, a, f, e).iter().flatten().copied().collect();
    (!present.is_empty()).then(|| median(&present))
}

/// Aggregate score per `(metric, method)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub metrics: Vec<MetricAxis>,
    pub methods: Vec<String>,
    /// `values[metric][method]`.
    pub values: Vec<Vec<f64>>,
}

/// Median over observations per cell, then the mean over the plan's
/// combinations. Cells without any score are skipped (and logged); a
/// `(metric, method)` pair with no cell at all is an error.
pub fn aggregate_scores(tensor: &ScoreTensor, plan: &AggregationPlan) -> Result<Aggregates> {
    if tensor.methods.is_empty() {
        return Err(Error::MethodUniverseEmpty);
    }
    let mut values = Vec::with_capacity(tensor.metrics.len());
    for (e, metric) in tensor.metrics.iter().enumerate() {
        let mut row = Vec::with_capacity(tensor.methods.len());
        for (f, method) in tensor.methods.iter().enumerate() {
            let medians: Vec<f64> = plan.combos.iter().filter_map(|&(d, a)| cell_median(tensor, d, a, f, e)).collect();
            if medians.is_empty() {
                return Err(Error::AllMissing {
                    metric: metric.id.clone(),
                    method: method.clone(),
                });
            }
            if medians.len() < plan.combos.len() {
                log::info!(
                    "{}/{}: {} of {} combinations have no scores",
                    metric.id,
                    method,
                    plan.combos.len() - medians.len(),
                    plan.combos.len()
                );
            }
            row.push(mean(&medians));
        }
        values.push(row);
    }
    Ok(Aggregates {
        metrics: tensor.metrics.clone(),
        methods: tensor.methods.clone(),
        values,
    })
}

/// Fractional ranks with rank 1 for the best score under `orientation`.
pub fn rank_methods(scores: &[f64], orientation: Orientation) -> Vec<f64> {
    match orientation {
        Orientation::LowerIsBetter => average_ranks(scores),
        Orientation::HigherIsBetter => average_ranks(&scores.iter().map(|v| -v).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementFlag {
    HighAgreement,
    Neutral,
    HighDisagreement,
}

impl AgreementFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            AgreementFlag::HighAgreement => "high_agreement",
            AgreementFlag::Neutral => "neutral",
            AgreementFlag::HighDisagreement => "high_disagreement",
        }
    }
}

/// Mean, median and sample SD of one method's ranks across a criterion's
/// metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub mu_hat: f64,
    pub median_rank: f64,
    pub sigma_hat: f64,
    pub flag: AgreementFlag,
}

/// Ranks of every method under every metric of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub modality: String,
    pub criterion: Criterion,
    pub metric_ids: Vec<String>,
    pub method_ids: Vec<String>,
    /// `ranks[metric][method]`.
    pub ranks: Vec<Vec<f64>>,
    pub summary: Vec<MethodSummary>,
}

/// Per-method summaries of a `metric x method` rank matrix. The SD flags
/// compare against the 0.15 and 0.85 linear-interpolation quantiles of all
/// methods' SDs.
pub fn summarize(ranks: &[Vec<f64>]) -> Vec<MethodSummary> {
    let n_methods = ranks.first().map_or(0, Vec::len);
    let columns: Vec<Vec<f64>> = (0..n_methods).map(|f| ranks.iter().map(|row| row[f]).collect()).collect();
    let sigmas: Vec<f64> = columns.iter().map(|c| sd_sample(c)).collect();
    if sigmas.is_empty() {
        return Vec::new();
    }
    let (lo, hi) = (quantile(&sigmas, 0.15), quantile(&sigmas, 0.85));
    columns
        .iter()
        .zip(&sigmas)
        .map(|(c, &s)| MethodSummary {
            mu_hat: mean(c),
            median_rank: median(c),
            sigma_hat: s,
            flag: if s < lo {
                AgreementFlag::HighAgreement
            } else if s > hi {
                AgreementFlag::HighDisagreement
            } else {
                AgreementFlag::Neutral
            },
        })
        .collect()
}

/// One ranking table per criterion present in `agg`, in criterion order.
pub fn ranking_tables(agg: &Aggregates, modality: &str) -> Vec<RankingTable> {
    Criterion::ALL
        .into_iter()
        .filter_map(|criterion| {
            let rows: Vec<usize> = (0..agg.metrics.len()).filter(|&e| agg.metrics[e].criterion == criterion).collect();
            if rows.is_empty() {
                return None;
            }
            let ranks: Vec<Vec<f64>> = rows
                .iter()
                .map(|&e| rank_methods(&agg.values[e], agg.metrics[e].orientation))
                .collect();
            Some(RankingTable {
                modality: modality.to_string(),
                criterion,
                metric_ids: rows.iter().map(|&e| agg.metrics[e].id.clone()).collect(),
                method_ids: agg.methods.clone(),
                summary: summarize(&ranks),
                ranks,
            })
        })
        .collect()
}

/// Rankings of equal length across architectures with different method
/// sets: every method's scores are combined over all architectures (and
/// datasets) where it has any before ranking, so a method missing under one
/// architecture still appears in the single ranking.
pub fn equalize_architecture_rankings(tensor: &ScoreTensor, modality: &str) -> Result<Vec<RankingTable>> {
    let agg = aggregate_scores(tensor, &AggregationPlan::aggregated(tensor))?;
    Ok(ranking_tables(&agg, modality))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MetricId;
    use proptest::prelude::*;

    fn names(p: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_methods(&[0.9, 0.1, 0.5], Orientation::HigherIsBetter), vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_methods(&[0.5, 0.5, 0.1], Orientation::HigherIsBetter), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[vec![2.0], vec![2.0], vec![2.0]]);
        assert_eq!((s[0].mu_hat, s[0].median_rank, s[0].sigma_hat), (2.0, 2.0, 0.0));
        let s = summarize(&[vec![1.0], vec![17.0]]);
        assert!((s[0].sigma_hat - 16.0 / 2f64.sqrt()).abs() < 1e-12);
        // sigmas 0, 1, 2, ..., 9 over ten methods: q15 = 1.35, q85 = 7.65
        let ranks: Vec<Vec<f64>> = vec![(0..10).map(|f| f as f64).collect(), (0..10).map(|f| -(f as f64)).collect()];
        let s = summarize(&ranks);
        let flags: Vec<AgreementFlag> = s.iter().map(|m| m.flag).collect();
        let sig: Vec<f64> = s.iter().map(|m| m.sigma_hat).collect();
        let (lo, hi) = (quantile(&sig, 0.15), quantile(&sig, 0.85));
        for (f, s) in flags.iter().zip(&sig) {
            let want = if *s < lo {
                AgreementFlag::HighAgreement
            } else if *s > hi {
                AgreementFlag::HighDisagreement
            } else {
                AgreementFlag::Neutral
            };
            assert_eq!(*f, want);
        }
        assert_eq!(flags[0], AgreementFlag::HighAgreement);
        assert_eq!(flags[9], AgreementFlag::HighDisagreement);
    }

    fn tensor_with(medians: &[[f64; 3]], archs: usize) -> ScoreTensor {
        // one dataset, `archs` architectures, 3 methods, one metric, 3 obs
        let mut t = ScoreTensor::new(names("d", 1), names("a", archs), names("f", 3), vec![MetricId::Fc.into()], 3);
        for a in 0..archs {
            for f in 0..3 {
                let m = medians[a][f];
                t.cell_mut(0, a, f, 0).copy_from_slice(&[Some(m - 1.0), Some(m), Some(m + 100.0)]);
            }
        }
        t
    }

    #[test]
    fn medians_then_means() {
        let t = tensor_with(&[[0.2, 1.0, 3.0], [0.4, 1.0, 5.0]], 2);
        let agg = aggregate_scores(&t, &AggregationPlan::aggregated(&t)).unwrap();
        assert!((agg.values[0][0] - 0.3).abs() < 1e-12);
        assert_eq!(agg.values[0][2], 4.0);
        let full = aggregate_scores(&t, &AggregationPlan::full(&t, 0, 1)).unwrap();
        assert_eq!(full.values[0], vec![0.4, 1.0, 5.0]);
    }

    #[test]
    fn full_and_aggregated_agree_on_single_combo() {
        let t = tensor_with(&[[0.7, 0.1, 0.4]], 1);
        let a = aggregate_scores(&t, &AggregationPlan::aggregated(&t)).unwrap();
        let f = aggregate_scores(&t, &AggregationPlan::full(&t, 0, 0)).unwrap();
        assert_eq!(a, f);
    }

    #[test]
    fn equalized_ranking_covers_architecture_specific_methods() {
        let mut t = tensor_with(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], 2);
        // method 2 exists only under architecture 1
        for v in t.cell_mut(0, 0, 2, 0) {
            *v = None;
        }
        let tables = equalize_architecture_rankings(&t, "image").unwrap();
        assert_eq!(tables[0].ranks[0], vec![3.0, 2.0, 1.0]);
        // permuting architectures does not change ranks
        let mut swapped = tensor_with(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], 2);
        for v in swapped.cell_mut(0, 1, 2, 0) {
            *v = None;
        }
        assert_eq!(equalize_architecture_rankings(&swapped, "image").unwrap()[0].ranks, tables[0].ranks);
        for v in t.cell_mut(0, 1, 2, 0) {
            *v = None;
        }
        assert!(matches!(equalize_architecture_rankings(&t, "image"), Err(Error::AllMissing { .. })));
    }

    proptest! {
        #[test]
        fn rank_rows_sum_and_orientation(v in prop::collection::vec(-3i32..3, 2..12)) {
            let s: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            let n = s.len() as f64;
            let hi = rank_methods(&s, Orientation::HigherIsBetter);
            prop_assert!((hi.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
            let neg: Vec<f64> = s.iter().map(|x| -x).collect();
            prop_assert_eq!(rank_methods(&s, Orientation::LowerIsBetter), rank_methods(&neg, Orientation::HigherIsBetter));
            // strictly monotone transforms keep the ranking
            let cubed: Vec<f64> = s.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            prop_assert_eq!(rank_methods(&cubed, Orientation::HigherIsBetter), hi);
        }
    }
}
