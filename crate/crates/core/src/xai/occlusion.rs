use super::XaiConfig;
use crate::data::{Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::tensor::{strides, unravel, Tensor};

/// Window start offsets `0, s, 2s, ...` that fit in `len`.
fn starts(len: usize, kernel: usize, stride: usize) -> Vec<usize> {
    (0..=len - kernel).step_by(stride).collect()
}

/// Average drop of the target logit over every occlusion window that covers
/// an element. Grid windows slide with overlap over the spatial axes and
/// cover all channels; clouds occlude single points.
pub fn occlusion(model: &dyn ModelOracle, x: &Tensor, modality: Modality, target: usize, cfg: &XaiConfig) -> Result<Tensor> {
    modality.check_input_shape(x.shape())?;
    let reference = model.logit(x, target)?;
    match modality {
        Modality::PointCloud => {
            let n = x.shape()[0];
            let mut out = Vec::with_capacity(n);
            for p in 0..n {
                let mut occ = x.clone();
                occ.data_mut()[p * 3..p * 3 + 3].fill(cfg.baseline);
                out.push(reference - model.logit(&occ, target)?);
            }
            Tensor::new(vec![n], out)
        }
        Modality::Image | Modality::Volume => {
            let (spatial, channels) = match modality {
                Modality::Image => (x.shape()[..2].to_vec(), x.shape()[2]),
                _ => (x.shape().to_vec(), 1),
            };
            if spatial.iter().any(|&d| d < cfg.kernel) {
                return Err(Error::KernelTooLarge {
                    kernel: vec![cfg.kernel; spatial.len()],
                    shape: x.shape().to_vec(),
                });
            }
            let axes: Vec<Vec<usize>> = spatial.iter().map(|&d| starts(d, cfg.kernel, cfg.stride)).collect();
            let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
            let n_windows: usize = counts.iter().product();
            let st = strides(&spatial);
            let n_sp: usize = spatial.iter().product();
            let mut total = vec![0.0; n_sp];
            let mut hits = vec![0usize; n_sp];
            let window_cells: usize = cfg.kernel.pow(spatial.len() as u32);
            let kshape = vec![cfg.kernel; spatial.len()];
            for w in 0..n_windows {
                let wi = unravel(w, &counts);
                let origin: Vec<usize> = wi.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
                let cells: Vec<usize> = (0..window_cells)
                    .map(|c| {
                        let off = unravel(c, &kshape);
                        origin.iter().zip(&off).zip(&st).map(|((o, d), s)| (o + d) * s).sum()
                    })
                    .collect();
                let mut occ = x.clone();
                for &p in &cells {
                    occ.data_mut()[p * channels..(p + 1) * channels].fill(cfg.baseline);
                }
                let drop = reference - model.logit(&occ, target)?;
                for &p in &cells {
                    total[p] += drop;
                    hits[p] += 1;
                }
            }
            let out = (0..n_sp)
                .flat_map(|p| {
                    let v = if hits[p] > 0 { total[p] / hits[p] as f64 } else { 0.0 };
                    std::iter::repeat_n(v, channels)
                })
                .collect();
            Tensor::new(x.shape().to_vec(), out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{Constant, Linear};
    use super::super::Method;
    use super::*;

    fn cfg(kernel: usize, stride: usize) -> XaiConfig {
        XaiConfig {
            kernel,
            stride,
            ..XaiConfig::new(Method::Occlusion)
        }
    }

    #[test]
    fn passthrough_model_hits_covering_windows() {
        // f(x) = x[k] with k the pixel (2, 1) of a 5x5 image
        let k = 2 * 5 + 1;
        let mut w = vec![0.0; 25];
        w[k] = 1.0;
        let m = Linear { w: vec![w], b: vec![0.0] };
        let x = Tensor::filled(&[5, 5, 1], 1.0);
        let c = cfg(2, 1);
        let a = occlusion(&m, &x, Modality::Image, 0, &c).unwrap();
        // brute force: a pixel is positive iff some 2x2 window covers both it and k
        for i in 0..5usize {
            for j in 0..5usize {
                let mut covered = false;
                let mut total = 0.0;
                let mut n = 0.0;
                for oi in 0..4usize {
                    for oj in 0..4usize {
                        let inside = |a: usize, b: usize| a >= oi && a < oi + 2 && b >= oj && b < oj + 2;
                        if inside(i, j) {
                            n += 1.0;
                            if inside(2, 1) {
                                covered = true;
                                total += 1.0;
                            }
                        }
                    }
                }
                let got = a.data()[i * 5 + j];
                assert_eq!(got > 0.0, covered);
                assert!((got - total / n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_model_gives_zero() {
        let x = Tensor::filled(&[6, 6, 3], 0.5);
        let a = occlusion(&Constant, &x, Modality::Image, 0, &cfg(3, 1)).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stride_equal_kernel_gives_blocks() {
        let w: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let m = Linear { w: vec![w.clone()], b: vec![0.0] };
        let x = Tensor::filled(&[4, 4, 1], 1.0);
        let a = occlusion(&m, &x, Modality::Image, 0, &cfg(2, 2)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (bi, bj) = (i / 2 * 2, j / 2 * 2);
                let block: f64 = [(bi, bj), (bi + 1, bj), (bi, bj + 1), (bi + 1, bj + 1)]
                    .iter()
                    .map(|&(p, q)| w[p * 4 + q])
                    .sum();
                assert_eq!(a.data()[i * 4 + j], block);
            }
        }
    }

    #[test]
    fn symmetric_model_gives_symmetric_map() {
        // f sums the main diagonal: invariant under transposing the image
        let mut w = vec![0.0; 36];
        for i in 0..6 {
            w[i * 6 + i] = 1.0;
        }
        let m = Linear { w: vec![w], b: vec![0.0] };
        let x = Tensor::new(vec![6, 6, 1], (0..36).map(|e| ((e / 6) + (e % 6)) as f64).collect()).unwrap();
        let a = occlusion(&m, &x, Modality::Image, 0, &cfg(3, 1)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((a.data()[i * 6 + j] - a.data()[j * 6 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cloud_points_one_by_one() {
        let w = vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let m = Linear { w: vec![w], b: vec![0.0] };
        let x = Tensor::filled(&[2, 3], 1.0);
        let a = occlusion(&m, &x, Modality::PointCloud, 0, &cfg(1, 1)).unwrap();
        assert_eq!(a.data(), &[1.0, 2.0]);
    }

    #[test]
    fn kernel_too_large() {
        let x = Tensor::zeros(&[3, 3, 1]);
        assert!(matches!(
            occlusion(&Constant, &x, Modality::Image, 0, &cfg(4, 1)),
            Err(Error::KernelTooLarge { .. })
        ));
    }
}
