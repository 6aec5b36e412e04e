use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model response against the fraction of removed (or inserted) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Curve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DegenerateCurve(format!("{} xs for {} ys", xs.len(), ys.len())));
        }
        if xs.iter().any(|x| !(0.0..=1.0).contains(x)) || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateCurve("xs must increase strictly within [0, 1]".into()));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFiniteInput("curve response".into()));
        }
        Ok(Curve { xs, ys })
    }
}

/// Trapezoidal area divided by the x range.
pub fn auc(c: &Curve) -> Result<f64> {
    if c.xs.len() < 2 {
        return Err(Error::DegenerateCurve(format!("{} point(s)", c.xs.len())));
    }
    let area: f64 = c
        .xs
        .windows(2)
        .zip(c.ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum();
    Ok(area / (c.xs[c.xs.len() - 1] - c.xs[0]))
}

/// Area over a response curve normalized to [0, 1]: `1 - auc`.
pub fn aoc(c: &Curve) -> Result<f64> {
    Ok(1.0 - auc(c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let flat = Curve::new(vec![0.0, 0.3, 1.0], vec![1.0; 3]).unwrap();
        assert!((auc(&flat).unwrap() - 1.0).abs() < 1e-15);
        let tri = Curve::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(auc(&tri).unwrap(), 0.5);
        assert_eq!(aoc(&tri).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        let one = Curve::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(auc(&one), Err(Error::DegenerateCurve(_))));
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Curve::new(vec![0.0, 1.5], vec![1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_explicit_trapezoids(ys in prop::collection::vec(-5.0f64..5.0, 5), gaps in prop::collection::vec(0.01f64..1.0, 4)) {
            let total: f64 = gaps.iter().sum();
            let mut xs = vec![0.0];
            for g in &gaps {
                xs.push(xs[xs.len() - 1] + g / total);
            }
            xs[4] = 1.0;
            let c = Curve::new(xs.clone(), ys.clone()).unwrap();
            let mut area = 0.0;
            for i in 0..4 {
                area += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
            }
            prop_assert!((auc(&c).unwrap() - area).abs() < 1e-12);
        }
    }
}
