//! Statistics about the rankings themselves: how much metrics of one
//! criterion disagree, whether their disagreement is lower than for random
//! rankings, and how similar metrics, architectures and methods rank.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use crate::data::{Criterion, MetricAxis, ScoreTensor};
use crate::error::{Error, Result};
use crate::ranking::{cell_median, rank_methods, RankingTable};
use crate::stats::{mean, median, pearson, sd_sample};

/// Fractional method ranks indexed by `(metric, dataset, architecture,
/// method)` for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHypercube {
    pub modality: String,
    pub metrics: Vec<MetricAxis>,
    pub datasets: Vec<String>,
    pub architectures: Vec<String>,
    pub methods: Vec<String>,
    ranks: Vec<f64>,
}

impl RankHypercube {
    pub fn new(
        modality: String,
        metrics: Vec<MetricAxis>,
        datasets: Vec<String>,
        architectures: Vec<String>,
        methods: Vec<String>,
        ranks: Vec<f64>,
    ) -> Result<Self> {
        let len = metrics.len() * datasets.len() * architectures.len() * methods.len();
        if ranks.len() != len {
            return Err(Error::IncompleteCube(format!("{} ranks for {len} cells", ranks.len())));
        }
        Ok(RankHypercube {
            modality,
            metrics,
            datasets,
            architectures,
            methods,
            ranks,
        })
    }

    /// Ranks every `(metric, dataset, architecture)` slice by the cell
    /// medians. Any cell without scores makes the cube incomplete.
    pub fn from_scores(tensor: &ScoreTensor, modality: &str) -> Result<Self> {
        let [nd, na, nf, ne, _] = tensor.shape();
        let mut ranks = vec![0.0; ne * nd * na * nf];
        for e in 0..ne {
            for d in 0..nd {
                for a in 0..na {
                    let medians = (0..nf)
                        .map(|f| {
                            cell_median(tensor, d, a, f, e).ok_or_else(|| {
                                Error::IncompleteCube(format!(
                                    "no scores for {} / {} / {} / {}",
                                    tensor.datasets[d], tensor.architectures[a], tensor.methods[f], tensor.metrics[e].id
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let r = rank_methods(&medians, tensor.metrics[e].orientation);
                    let start = ((e * nd + d) * na + a) * nf;
                    ranks[start..start + nf].copy_from_slice(&r);
                }
            }
        }
        RankHypercube::new(
            modality.to_string(),
            tensor.metrics.clone(),
            tensor.datasets.clone(),
            tensor.architectures.clone(),
            tensor.methods.clone(),
            ranks,
        )
    }

    /// Like [`RankHypercube::from_scores`], but first drops every method
    /// with a cell that has no scores (e.g. GradCAM under an architecture
    /// without a conv stage).
    pub fn from_complete_methods(tensor: &ScoreTensor, modality: &str) -> Result<Self> {
        let [nd, na, nf, ne, _] = tensor.shape();
        let keep: Vec<usize> = (0..nf)
            .filter(|&f| {
                let complete = (0..nd).all(|d| (0..na).all(|a| (0..ne).all(|e| cell_median(tensor, d, a, f, e).is_some())));
                if !complete {
                    log::warn!("method {} has missing cells and is left out of the rank cube", tensor.methods[f]);
                }
                complete
            })
            .collect();
        if keep.len() < 2 {
            return Err(Error::IncompleteCube(format!("only {} methods have scores in every cell", keep.len())));
        }
        let mut sub = ScoreTensor::new(
            tensor.datasets.clone(),
            tensor.architectures.clone(),
            keep.iter().map(|&f| tensor.methods[f].clone()).collect(),
            tensor.metrics.clone(),
            tensor.n_obs,
        );
        for d in 0..nd {
            for a in 0..na {
                for (g, &f) in keep.iter().enumerate() {
                    for e in 0..ne {
                        sub.cell_mut(d, a, g, e).copy_from_slice(tensor.cell(d, a, f, e));
                    }
                }
            }
        }
        RankHypercube::from_scores(&sub, modality)
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.metrics.len(), self.datasets.len(), self.architectures.len(), self.methods.len()]
    }

    pub fn get(&self, e: usize, d: usize, a: usize, f: usize) -> f64 {
        let [_, nd, na, nf] = self.shape();
        self.ranks[((e * nd + d) * na + a) * nf + f]
    }

    /// Metric indices of one criterion.
    pub fn criterion_metrics(&self, c: Criterion) -> Vec<usize> {
        (0..self.metrics.len()).filter(|&e| self.metrics[e].criterion == c).collect()
    }

    /// Criteria with at least two metrics in the cube.
    fn criteria(&self) -> Vec<Criterion> {
        Criterion::ALL.into_iter().filter(|&c| self.criterion_metrics(c).len() >= 2).collect()
    }

    fn check(&self) -> Result<()> {
        let [ne, nd, na, nf] = self.shape();
        if ne == 0 || nd == 0 || na == 0 || nf < 2 {
            return Err(Error::IncompleteCube(format!("cube shape {:?}", self.shape())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Architecture,
    Dataset,
}

/// Mean SD between a criterion's metric ranks, one value per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdTable {
    pub criterion: Criterion,
    pub group_ids: Vec<String>,
    pub values: Vec<f64>,
}

/// Sample SD of a method's ranks across the criterion's metrics in one
/// `(dataset, architecture)` cell, averaged over datasets and methods
/// (per architecture) or over architectures and methods (per dataset).
pub fn sd_between_metrics(cube: &RankHypercube, group_by: GroupBy) -> Result<Vec<SdTable>> {
    cube.check()?;
    let [_, nd, na, nf] = cube.shape();
    Ok(cube
        .criteria()
        .into_iter()
        .map(|c| {
            let es = cube.criterion_metrics(c);
            let cell_sd = |d: usize, a: usize, f: usize| sd_sample(&es.iter().map(|&e| cube.get(e, d, a, f)).collect::<Vec<_>>());
            let (group_ids, values) = match group_by {
                GroupBy::Architecture => (
                    cube.architectures.clone(),
                    (0..na)
                        .map(|a| mean(&(0..nd).flat_map(|d| (0..nf).map(move |f| (d, f))).map(|(d, f)| cell_sd(d, a, f)).collect::<Vec<_>>()))
                        .collect(),
                ),
                GroupBy::Dataset => (
                    cube.datasets.clone(),
                    (0..nd)
                        .map(|d| mean(&(0..na).flat_map(|a| (0..nf).map(move |f| (a, f))).map(|(a, f)| cell_sd(d, a, f)).collect::<Vec<_>>()))
                        .collect(),
                ),
            };
            SdTable {
                criterion: c,
                group_ids,
                values,
            }
        })
        .collect())
}

/// Variance of a uniformly random rank on `{1, ..., n}`: `(n^2 - 1) / 12`.
pub fn random_rank_variance(n_methods: usize) -> f64 {
    let n = n_methods as f64;
    (n * n - 1.0) / 12.0
}

/// Center of the absolute deviations in Levene's statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Classic Levene.
    Mean,
    /// Brown-Forsythe.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeveneResult {
    pub statistic: f64,
    pub p_two_sided: f64,
    pub p_one_sided: f64,
    pub accepted: bool,
}

/// One-sided Levene test of "the observed ranks are less dispersed than a
/// random ranking", with the deterministic support `{1, ..., n}` as the
/// reference group. The two-sided p-value comes from `F(1, N - 2)`; it is
/// halved when the observed mean absolute deviation is smaller and turned
/// into `1 - p/2` otherwise. Accepted iff the one-sided p is below `alpha`.
pub fn levene_one_sided(observed: &[f64], n_methods: usize, alpha: f64, centering: Centering) -> Result<LeveneResult> {
    if observed.len() < 2 || n_methods < 2 {
        return Err(Error::DegenerateGroups(format!(
            "need at least 2 observed ranks and 2 methods, got {} and {n_methods}",
            observed.len()
        )));
    }
    let reference: Vec<f64> = (1..=n_methods).map(|r| r as f64).collect();
    let deviations = |g: &[f64]| -> Vec<f64> {
        let c = match centering {
            Centering::Mean => mean(g),
            Centering::Median => median(g),
        };
        g.iter().map(|v| (v - c).abs()).collect()
    };
    let groups = [deviations(observed), deviations(&reference)];
    let n_total = (observed.len() + n_methods) as f64;
    let grand = mean(&groups.iter().flatten().copied().collect::<Vec<_>>());
    let means = [mean(&groups[0]), mean(&groups[1])];
    let between: f64 = groups.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand).powi(2)).sum();
    let within: f64 = groups.iter().zip(&means).map(|(g, m)| g.iter().map(|z| (z - m).powi(2)).sum::<f64>()).sum();
    if within <= 0.0 {
        return Err(Error::DegenerateGroups("no within-group variation of absolute deviations".into()));
    }
    let statistic = (n_total - 2.0) * between / within;
    let f = FisherSnedecor::new(1.0, n_total - 2.0).map_err(|e| Error::DegenerateGroups(e.to_string()))?;
    let p_two_sided = f.sf(statistic).clamp(0.0, 1.0);
    let p_one_sided = if means[0] < means[1] { p_two_sided / 2.0 } else { 1.0 - p_two_sided / 2.0 };
    Ok(LeveneResult {
        statistic,
        p_two_sided,
        p_one_sided,
        accepted: p_one_sided < alpha,
    })
}

/// Share of accepted Levene tests per criterion and method over all
/// `(dataset, architecture)` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeveneProportions {
    pub criteria: Vec<Criterion>,
    pub methods: Vec<String>,
    /// `rho[criterion][method]`.
    pub rho: Vec<Vec<f64>>,
    /// Per method, the criteria weighted by their metric counts.
    pub weighted: Vec<f64>,
}

pub fn levene_proportion(cube: &RankHypercube, alpha: f64, centering: Centering) -> Result<LeveneProportions> {
    cube.check()?;
    let [_, nd, na, nf] = cube.shape();
    let criteria = cube.criteria();
    let mut rho = Vec::with_capacity(criteria.len());
    for &c in &criteria {
        let es = cube.criterion_metrics(c);
        let mut row = Vec::with_capacity(nf);
        for f in 0..nf {
            let mut accepted = 0;
            for d in 0..nd {
                for a in 0..na {
                    let obs: Vec<f64> = es.iter().map(|&e| cube.get(e, d, a, f)).collect();
                    if levene_one_sided(&obs, nf, alpha, centering)?.accepted {
                        accepted += 1;
                    }
                }
            }
            row.push(accepted as f64 / (nd * na) as f64);
        }
        rho.push(row);
    }
    let weights: Vec<f64> = criteria.iter().map(|&c| cube.criterion_metrics(c).len() as f64).collect();
    let weighted = weighted_criterion_average(&rho, &weights);
    Ok(LeveneProportions {
        criteria,
        methods: cube.methods.clone(),
        rho,
        weighted,
    })
}

/// Column-wise weighted mean of `rows` (one row per criterion).
pub fn weighted_criterion_average(rows: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let n = rows.first().map_or(0, Vec::len);
    (0..n)
        .map(|f| rows.iter().zip(weights).map(|(r, w)| w * r[f]).sum::<f64>() / total)
        .collect()
}

/// Symmetric matrix with named rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub label: String,
    pub ids: Vec<String>,
    /// NaN marks an undefined entry (`null` in JSON).
    #[serde(with = "nan_as_null")]
    pub values: Vec<Vec<f64>>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let m: Vec<Vec<Option<f64>>> = v.iter().map(|r| r.iter().map(|x| (!x.is_nan()).then_some(*x)).collect()).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let m = Vec::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(m.into_iter().map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()).collect())
    }
}

/// Mean absolute rank difference for every metric pair of each criterion,
/// over all datasets, architectures and methods.
pub fn metric_distance_matrix(cube: &RankHypercube) -> Result<Vec<NamedMatrix>> {
    cube.check()?;
    let [_, nd, na, nf] = cube.shape();
    Ok(cube
        .criteria()
        .into_iter()
        .map(|c| {
            let es = cube.criterion_metrics(c);
            let values = es
                .iter()
                .map(|&ei| {
                    es.iter()
                        .map(|&ej| {
                            let mut total = 0.0;
                            for d in 0..nd {
                                for a in 0..na {
                                    for f in 0..nf {
                                        total += (cube.get(ei, d, a, f) - cube.get(ej, d, a, f)).abs();
                                    }
                                }
                            }
                            total / (nd * na * nf) as f64
                        })
                        .collect()
                })
                .collect();
            NamedMatrix {
                label: c.as_str().to_string(),
                ids: es.iter().map(|&e| cube.metrics[e].id.clone()).collect(),
                values,
            }
        })
        .collect())
}

/// Per method, the mean absolute rank difference between every
/// architecture pair over all datasets and metrics.
pub fn architecture_rank_distance(cube: &RankHypercube) -> Result<Vec<NamedMatrix>> {
    cube.check()?;
    let [ne, nd, na, nf] = cube.shape();
    if na < 2 {
        return Err(Error::IncompleteCube("need at least 2 architectures".into()));
    }
    Ok((0..nf)
        .map(|f| {
            let values = (0..na)
                .map(|ai| {
                    (0..na)
                        .map(|aj| {
                            let mut total = 0.0;
                            for e in 0..ne {
                                for d in 0..nd {
                                    total += (cube.get(e, d, ai, f) - cube.get(e, d, aj, f)).abs();
                                }
                            }
                            total / (ne * nd) as f64
                        })
                        .collect()
                })
                .collect();
            NamedMatrix {
                label: cube.methods[f].clone(),
                ids: cube.architectures.clone(),
                values,
            }
        })
        .collect())
}

/// Pearson correlation between two methods' rank trajectories over every
/// `(metric, dataset, architecture)` cell. `None` where a trajectory is
/// constant.
pub fn method_rank_correlation(cube: &RankHypercube) -> Result<Vec<Vec<Option<f64>>>> {
    cube.check()?;
    let [ne, nd, na, nf] = cube.shape();
    if ne * nd * na < 3 {
        return Err(Error::IncompleteCube("need at least 3 rank observations per method".into()));
    }
    let traj: Vec<Vec<f64>> = (0..nf)
        .map(|f| {
            (0..ne)
                .flat_map(|e| (0..nd).flat_map(move |d| (0..na).map(move |a| (e, d, a))))
                .map(|(e, d, a)| cube.get(e, d, a, f))
                .collect()
        })
        .collect();
    Ok((0..nf).map(|i| (0..nf).map(|j| pearson(&traj[i], &traj[j])).collect()).collect())
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidSpec(format!("kendall tau needs equal lengths >= 2, got {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let pairs = |t: usize| (t * t.saturating_sub(1) / 2) as f64;
    let runs = |eq: &dyn Fn(usize, usize) -> bool, order: &[usize]| -> f64 {
        let mut total = 0.0;
        let mut start = 0;
        for i in 1..=order.len() {
            if i == order.len() || !eq(order[i - 1], order[i]) {
                total += pairs(i - start);
                start = i;
            }
        }
        total
    };
    let n1 = runs(&|i, j| a[i] == a[j], &idx);
    let n3 = runs(&|i, j| a[i] == a[j] && b[i] == b[j], &idx);
    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let swaps = merge_count(&mut seq) as f64;
    let mut by_b: Vec<usize> = (0..n).collect();
    by_b.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    let n2 = runs(&|i, j| b[i] == b[j], &by_b);
    let n0 = pairs(n);
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return Err(Error::AllTied);
    }
    Ok(((n0 - n1 - n2 + n3 - 2.0 * swaps) / denom).clamp(-1.0, 1.0))
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// Mean tau between every architecture pair over the datasets and the
/// metrics of `criterion`; all-tied pairs are skipped.
pub fn kendall_tau_matrix(cube: &RankHypercube, criterion: Criterion) -> Result<NamedMatrix> {
    cube.check()?;
    let [_, nd, na, nf] = cube.shape();
    let es = cube.criterion_metrics(criterion);
    let slice = |e: usize, d: usize, a: usize| (0..nf).map(|f| cube.get(e, d, a, f)).collect::<Vec<_>>();
    let mut values = vec![vec![f64::NAN; na]; na];
    for ai in 0..na {
        for aj in 0..na {
            let taus: Vec<f64> = es
                .iter()
                .flat_map(|&e| (0..nd).map(move |d| (e, d)))
                .filter_map(|(e, d)| kendall_tau(&slice(e, d, ai), &slice(e, d, aj)).ok())
                .collect();
            if !taus.is_empty() {
                values[ai][aj] = mean(&taus);
            }
        }
    }
    Ok(NamedMatrix {
        label: criterion.as_str().to_string(),
        ids: cube.architectures.clone(),
        values,
    })
}

/// Midranks of the pooled sample, doubled so they stay integral.
fn doubled_midranks(pooled: &[f64]) -> Vec<i64> {
    crate::stats::average_ranks(pooled).iter().map(|r| (2.0 * r).round() as i64).collect()
}

fn check_groups(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateGroups(format!("group sizes {} and {} (need at least 2)", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("rank group".into()));
    }
    Ok(())
}

/// Exact two-sided WMW p-value: the observed U against all
/// `C(n1 + n2, n1)` relabelings of the pooled midranks.
pub fn wmw_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check_groups(a, b)?;
    let (n1, n) = (a.len(), a.len() + b.len());
    if n > 40 {
        return Err(Error::InvalidSpec(format!("exact enumeration over {n} values is too large")));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r2 = doubled_midranks(&pooled);
    let observed: i64 = r2[..n1].iter().sum();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    // Gosper's hack walks every n-bit mask with n1 bits set
    let mut mask: u64 = (1 << n1) - 1;
    let limit: u64 = 1 << n;
    while mask < limit {
        let mut s = 0;
        let mut m = mask;
        while m != 0 {
            s += r2[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        le += (s <= observed) as u64;
        ge += (s >= observed) as u64;
        total += 1;
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok((2.0 * le.min(ge) as f64 / total as f64).min(1.0))
}

/// Normal approximation of the two-sided WMW p-value with tie correction
/// and continuity correction.
pub fn wmw_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    check_groups(a, b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = crate::stats::average_ranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] != sorted[start] {
            let t = (i - start) as f64;
            ties += t * t * t - t;
            start = i;
        }
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - n1 * n2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    Ok((2.0 * std.sf(z)).min(1.0))
}

/// Two-sided Wilcoxon-Mann-Whitney p-value: exact when both groups have at
/// most 8 values, normal approximation otherwise.
pub fn wilcoxon_mann_whitney(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() <= 8 && b.len() <= 8 {
        wmw_exact(a, b)
    } else {
        wmw_normal(a, b)
    }
}

/// Pairwise WMW p-values between methods' per-metric rank vectors.
pub fn wmw_matrix(table: &RankingTable) -> Result<NamedMatrix> {
    if table.ranks.len() < 2 {
        return Err(Error::DegenerateGroups(format!("criterion {} has fewer than 2 metrics", table.criterion.as_str())));
    }
    let nf = table.method_ids.len();
    let col = |f: usize| table.ranks.iter().map(|row| row[f]).collect::<Vec<_>>();
    let mut values = vec![vec![1.0; nf]; nf];
    for i in 0..nf {
        for j in i + 1..nf {
            let p = wilcoxon_mann_whitney(&col(i), &col(j))?;
            values[i][j] = p;
            values[j][i] = p;
        }
    }
    Ok(NamedMatrix {
        label: table.criterion.as_str().to_string(),
        ids: table.method_ids.clone(),
        values,
    })
}

/// Settings of [`meta_stats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    pub alpha: f64,
    pub centering: Centering,
    /// Criterion whose rankings feed the architecture tau matrix.
    pub tau_criterion: Criterion,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            alpha: 0.1,
            centering: Centering::Mean,
            tau_criterion: Criterion::Faithfulness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaStatsResult {
    pub sd_by_architecture: Vec<SdTable>,
    pub sd_by_dataset: Vec<SdTable>,
    pub levene: LeveneProportions,
    pub metric_distances: Vec<NamedMatrix>,
    /// Empty with a single architecture.
    pub architecture_distances: Vec<NamedMatrix>,
    pub method_correlation: Vec<Vec<Option<f64>>>,
    pub kendall_tau: NamedMatrix,
    pub wmw: Vec<NamedMatrix>,
}

pub fn meta_stats(cube: &RankHypercube, tables: &[RankingTable], cfg: &MetaConfig) -> Result<MetaStatsResult> {
    Ok(MetaStatsResult {
        sd_by_architecture: sd_between_metrics(cube, GroupBy::Architecture)?,
        sd_by_dataset: sd_between_metrics(cube, GroupBy::Dataset)?,
        levene: levene_proportion(cube, cfg.alpha, cfg.centering)?,
        metric_distances: metric_distance_matrix(cube)?,
        architecture_distances: if cube.architectures.len() >= 2 {
            architecture_rank_distance(cube)?
        } else {
            Vec::new()
        },
        method_correlation: method_rank_correlation(cube)?,
        kendall_tau: kendall_tau_matrix(cube, cfg.tau_criterion)?,
        wmw: tables
            .iter()
            .filter(|t| t.ranks.len() >= 2)
            .map(wmw_matrix)
            .collect::<Result<Vec<_>>>()?,
    })
}
