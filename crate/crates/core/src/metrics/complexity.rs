//! Complexity metrics. All three flatten the map and treat every entry
//! independently of its neighbours.

use super::Score;
use crate::tensor::Tensor;

/// Gini index of the absolute map values. HigherIsBetter.
pub fn sparseness(map: &Tensor) -> Score {
    let mut a: Vec<f64> = map.data().iter().map(|v| v.abs()).collect();
    let total: f64 = a.iter().sum();
    if total <= 0.0 {
        return Score::degenerate();
    }
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let weighted: f64 = a.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    Score::new(2.0 * weighted / (n * total) - (n + 1.0) / n)
}

/// Shannon entropy (nats) of the map normalized to unit mass.
/// LowerIsBetter.
pub fn complexity(map: &Tensor) -> Score {
    let total: f64 = map.data().iter().map(|v| v.abs()).sum();
    if total <= 0.0 {
        return Score::degenerate();
    }
    let h = map
        .data()
        .iter()
        .map(|v| v.abs() / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Score::new(h)
}

/// Number of entries whose absolute value exceeds `epsilon`. LowerIsBetter.
pub fn effective_complexity(map: &Tensor, epsilon: f64) -> usize {
    map.data().iter().filter(|v| v.abs() > epsilon).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn closed_forms() {
        assert_eq!(sparseness(&t(&[0.0, 0.0, 1.0, 0.0])).value, 0.75);
        assert!(sparseness(&t(&[0.3; 6])).value.abs() < 1e-12);
        assert!((sparseness(&t(&[0.5, 0.5, 0.0, 0.0])).value - 0.5).abs() < 1e-12);
        assert_eq!(complexity(&t(&[0.0, 1.0, 0.0])).value, 0.0);
        assert!((complexity(&t(&[1.0; 8])).value - 8f64.ln()).abs() < 1e-12);
        assert!((complexity(&t(&[0.5, 0.5, 0.0, 0.0])).value - 2f64.ln()).abs() < 1e-12);
        assert_eq!(effective_complexity(&t(&[0.9, 0.4, 0.05, 0.0]), 0.1), 2);
        assert_eq!(effective_complexity(&t(&[1.0, 0.4]), 1.0), 0);
    }

    #[test]
    fn all_zero_is_degenerate() {
        assert!(sparseness(&t(&[0.0; 4])).degenerate);
        assert!(complexity(&t(&[0.0; 4])).degenerate);
    }

    proptest! {
        #[test]
        fn scale_invariance(v in prop::collection::vec(0.0f64..1.0, 2..40), c in 0.01f64..100.0) {
            prop_assume!(v.iter().sum::<f64>() > 1e-6);
            let a = t(&v);
            let b = a.map(|x| x * c);
            prop_assert!((sparseness(&a).value - sparseness(&b).value).abs() < 1e-9);
            prop_assert!((complexity(&a).value - complexity(&b).value).abs() < 1e-9);
        }

        #[test]
        fn ecp_monotone(v in prop::collection::vec(0.0f64..1.0, 1..40), e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(effective_complexity(&t(&v), lo) >= effective_complexity(&t(&v), hi));
        }

        #[test]
        fn sparseness_in_unit_interval(v in prop::collection::vec(0.0f64..1.0, 1..40)) {
            prop_assume!(v.iter().sum::<f64>() > 0.0);
            let s = sparseness(&t(&v)).value;
            prop_assert!((-1e-12..1.0).contains(&s));
        }
    }
}
