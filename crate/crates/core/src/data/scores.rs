use serde::{Deserialize, Serialize};

use super::ids::{Criterion, MetricId, Orientation};
use crate::error::{Error, Result};

/// One metric axis entry. Built-in metrics carry their own criterion and
/// orientation; ingested metrics declare them in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricAxis {
    pub id: String,
    pub criterion: Criterion,
    pub orientation: Orientation,
}

impl From<MetricId> for MetricAxis {
    fn from(m: MetricId) -> Self {
        MetricAxis {
            id: m.as_str().to_string(),
            criterion: m.criterion(),
            orientation: m.orientation(),
        }
    }
}

/// Evaluation scores indexed by `(dataset, architecture, method, metric,
/// observation)`. Raw scores are stored unoriented; a failed cell is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTensor {
    pub datasets: Vec<String>,
    pub architectures: Vec<String>,
    pub methods: Vec<String>,
    pub metrics: Vec<MetricAxis>,
    pub n_obs: usize,
    values: Vec<Option<f64>>,
}

impl ScoreTensor {
    pub fn new(
        datasets: Vec<String>,
        architectures: Vec<String>,
        methods: Vec<String>,
        metrics: Vec<MetricAxis>,
        n_obs: usize,
    ) -> Self {
        let len = datasets.len() * architectures.len() * methods.len() * metrics.len() * n_obs;
        ScoreTensor {
            datasets,
            architectures,
            methods,
            metrics,
            n_obs,
            values: vec![None; len],
        }
    }

    pub fn shape(&self) -> [usize; 5] {
        [
            self.datasets.len(),
            self.architectures.len(),
            self.methods.len(),
            self.metrics.len(),
            self.n_obs,
        ]
    }

    fn index(&self, d: usize, a: usize, f: usize, e: usize, o: usize) -> usize {
        let [_, na, nf, ne, no] = self.shape();
        (((d * na + a) * nf + f) * ne + e) * no + o
    }

    pub fn get(&self, d: usize, a: usize, f: usize, e: usize, o: usize) -> Option<f64> {
        self.values[self.index(d, a, f, e, o)]
    }

    pub fn set(&mut self, d: usize, a: usize, f: usize, e: usize, o: usize, v: Option<f64>) {
        let i = self.index(d, a, f, e, o);
        self.values[i] = v.filter(|x| x.is_finite());
    }

    /// All observation scores of one `(d, a, f, e)` cell.
    pub fn cell(&self, d: usize, a: usize, f: usize, e: usize) -> &[Option<f64>] {
        let start = self.index(d, a, f, e, 0);
        &self.values[start..start + self.n_obs]
    }

    pub fn cell_mut(&mut self, d: usize, a: usize, f: usize, e: usize) -> &mut [Option<f64>] {
        let start = self.index(d, a, f, e, 0);
        let n = self.n_obs;
        &mut self.values[start..start + n]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn from_values(
        datasets: Vec<String>,
        architectures: Vec<String>,
        methods: Vec<String>,
        metrics: Vec<MetricAxis>,
        n_obs: usize,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        let mut t = ScoreTensor::new(datasets, architectures, methods, metrics, n_obs);
        if values.len() != t.values.len() {
            return Err(Error::ShapeMismatch {
                expected: t.shape().to_vec(),
                actual: vec![values.len()],
            });
        }
        t.values = values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect();
        Ok(t)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn metric_index(&self, id: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m.id == id)
    }

    /// Z-standardizes one `(metric, dataset)` group over all architectures,
    /// methods and observations (population SD). A zero-SD group maps to
    /// zeros; missing cells stay missing.
    pub fn standardize_group(&mut self, metric: usize, dataset: usize) -> Result<()> {
        let [_, na, nf, _, _] = self.shape();
        let mut present = Vec::new();
        for a in 0..na {
            for f in 0..nf {
                present.extend(self.cell(dataset, a, f, metric).iter().flatten().copied());
            }
        }
        if present.is_empty() {
            return Err(Error::EmptyGroup(format!(
                "metric {} on dataset {}",
                self.metrics[metric].id, self.datasets[dataset]
            )));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let sd = (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = present.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // rounding noise of a constant group must not be blown up to unit SD
        let degenerate = sd <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        for a in 0..na {
            for f in 0..nf {
                for v in self.cell_mut(dataset, a, f, metric).iter_mut().flatten() {
                    *v = if degenerate { 0.0 } else { (*v - mean) / sd };
                }
            }
        }
        Ok(())
    }

    /// Standardizes every `(metric, dataset)` group independently.
    pub fn standardize_scores(&self) -> Result<ScoreTensor> {
        let mut out = self.clone();
        for e in 0..self.metrics.len() {
            for d in 0..self.datasets.len() {
                out.standardize_group(e, d)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor_1d(values: &[f64]) -> ScoreTensor {
        let mut t = ScoreTensor::new(
            vec!["d".into()],
            vec!["a".into()],
            vec!["f".into()],
            vec![MetricId::Fc.into()],
            values.len(),
        );
        for (o, &v) in values.iter().enumerate() {
            t.set(0, 0, 0, 0, o, Some(v));
        }
        t
    }

    #[test]
    fn z_score_of_arithmetic_sequence() {
        let s = tensor_1d(&[1.0, 2.0, 3.0]).standardize_scores().unwrap();
        let got: Vec<f64> = s.cell(0, 0, 0, 0).iter().map(|v| v.unwrap()).collect();
        let z = 1.5f64.sqrt();
        for (g, e) in got.iter().zip([-z, 0.0, z]) {
            assert!((g - e).abs() < 1e-12);
        }
        assert!((z - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn degenerate_group_is_zero() {
        let s = tensor_1d(&[5.0, 5.0, 5.0]).standardize_scores().unwrap();
        assert!(s.cell(0, 0, 0, 0).iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn empty_group_errors() {
        let t = ScoreTensor::new(vec!["d".into()], vec!["a".into()], vec!["f".into()], vec![MetricId::Fc.into()], 2);
        assert!(matches!(t.standardize_scores(), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn metrics_are_standardized_independently() {
        // two metrics, two methods; brute-force the per-group mean/SD
        let mut t = ScoreTensor::new(
            vec!["d".into()],
            vec!["a".into()],
            vec!["f1".into(), "f2".into()],
            vec![MetricId::Fc.into(), MetricId::Pf.into()],
            2,
        );
        let raw = [[[1.0, 3.0], [10.0, 20.0]], [[2.0, 4.0], [30.0, 40.0]]];
        for f in 0..2 {
            for e in 0..2 {
                for o in 0..2 {
                    t.set(0, 0, f, e, o, Some(raw[f][e][o]));
                }
            }
        }
        let s = t.standardize_scores().unwrap();
        for e in 0..2 {
            let group: Vec<f64> = (0..2).flat_map(|f| (0..2).map(move |o| raw[f][e][o])).collect();
            let mean = group.iter().sum::<f64>() / 4.0;
            let sd = (group.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0).sqrt();
            for f in 0..2 {
                for o in 0..2 {
                    let expected = (raw[f][e][o] - mean) / sd;
                    assert!((s.get(0, 0, f, e, o).unwrap() - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn missing_cells_survive_standardization() {
        let mut t = tensor_1d(&[1.0, 2.0, 3.0]);
        t.set(0, 0, 0, 0, 1, None);
        let s = t.standardize_scores().unwrap();
        assert_eq!(s.get(0, 0, 0, 0, 1), None);
        assert_eq!(s.missing_count(), 1);
        assert!((s.get(0, 0, 0, 0, 0).unwrap() + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn standardized_groups_have_zero_mean_unit_sd(v in proptest::collection::vec(-100.0f64..100.0, 3..50)) {
            let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-6);
            let s = tensor_1d(&v).standardize_scores().unwrap();
            let z: Vec<f64> = s.cell(0, 0, 0, 0).iter().map(|x| x.unwrap()).collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }
}
