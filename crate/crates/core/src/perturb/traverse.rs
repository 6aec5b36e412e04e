use crate::data::Modality;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Shifts an input along its first axis.
///
/// Grids move by `round(amount)` cells with zero padding. Clouds translate
/// every x coordinate by `amount`; a point that reaches the cloud's original
/// x bound (or passes it) is mapped to the origin.
pub fn shift_x(x: &Tensor, modality: Modality, amount: f64) -> Result<Tensor> {
    modality.check_input_shape(x.shape()).map_err(|_| {
        Error::WrongModality(format!("cannot traverse shape {:?} as {}", x.shape(), modality.as_str()))
    })?;
    match modality {
        Modality::Image | Modality::Volume => {
            let n0 = x.shape()[0];
            let plane = x.len() / n0;
            let shift = amount.round() as isize;
            let mut out = Tensor::zeros(x.shape());
            for i in 0..n0 as isize {
                let src = i - shift;
                if src >= 0 && src < n0 as isize {
                    let (d, s) = (i as usize * plane, src as usize * plane);
                    out.data_mut()[d..d + plane].copy_from_slice(&x.data()[s..s + plane]);
                }
            }
            Ok(out)
        }
        Modality::PointCloud => {
            if amount == 0.0 {
                return Ok(x.clone());
            }
            let xs = x.data().chunks(3).map(|p| p[0]);
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let mut out = x.clone();
            for p in out.data_mut().chunks_mut(3) {
                let moved = p[0] + amount;
                if moved >= hi || moved <= lo {
                    p.copy_from_slice(&[0.0, 0.0, 0.0]);
                } else {
                    p[0] = moved;
                }
            }
            Ok(out)
        }
    }
}

/// `n_steps` inputs shifted by `t * extent / n_steps` for `t = 0..n_steps`;
/// the extent is the first-axis length (grids) or the x range (clouds).
pub fn x_axis_traversal(x: &Tensor, modality: Modality, n_steps: usize) -> Result<Vec<Tensor>> {
    if n_steps < 2 {
        return Err(Error::InvalidSpec(format!("traversal needs at least 2 steps, got {n_steps}")));
    }
    modality.check_input_shape(x.shape()).map_err(|_| {
        Error::WrongModality(format!("cannot traverse shape {:?} as {}", x.shape(), modality.as_str()))
    })?;
    let extent = match modality {
        Modality::PointCloud => {
            let xs = x.data().chunks(3).map(|p| p[0]);
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            hi - lo
        }
        _ => x.shape()[0] as f64,
    };
    (0..n_steps)
        .map(|t| shift_x(x, modality, t as f64 * extent / n_steps as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_is_identity() {
        let x = Tensor::new(vec![4, 2, 1], (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(shift_x(&x, Modality::Image, 0.0).unwrap(), x);
        let c = Tensor::new(vec![2, 3], vec![0.0, 1.0, 2.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(shift_x(&c, Modality::PointCloud, 0.0).unwrap(), c);
    }

    #[test]
    fn full_shift_empties_image() {
        let x = Tensor::filled(&[4, 3, 3], 1.0);
        assert!(shift_x(&x, Modality::Image, 4.0).unwrap().data().iter().all(|&v| v == 0.0));
        let y = shift_x(&x, Modality::Volume, 1.0).unwrap();
        assert_eq!(y.data()[..9], [0.0; 9]);
        assert_eq!(y.data()[9..], [1.0; 27]);
    }

    #[test]
    fn cloud_points_at_bound_go_to_origin() {
        let c = Tensor::new(vec![3, 3], vec![0.0, 5.0, 5.0, 1.0, 2.0, 3.0, 2.0, 7.0, 7.0]).unwrap();
        let y = shift_x(&c, Modality::PointCloud, 1.0).unwrap();
        // x=1 lands on the bound 2, x=2 passes it
        assert_eq!(y.data(), &[1.0, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn traversal_steps() {
        let x = Tensor::filled(&[8, 2, 1], 1.0);
        let steps = x_axis_traversal(&x, Modality::Image, 4).unwrap();
        assert_eq!(steps.len(), 4);
        let zeros: Vec<usize> = steps.iter().map(|s| s.data().iter().filter(|&&v| v == 0.0).count()).collect();
        assert_eq!(zeros, vec![0, 4, 8, 12]);
        assert!(x_axis_traversal(&x, Modality::Image, 1).is_err());
    }
}
