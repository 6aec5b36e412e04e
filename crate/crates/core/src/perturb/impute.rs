use crate::data::Modality;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{strides, unravel, Tensor};

const TOLERANCE: f64 = 1e-4;
const MAX_SWEEPS: usize = 100_000;

/// Replaces removed elements by a harmonic interpolation of the kept ones,
/// then adds `N(0, noise_sd^2)` noise to the imputed entries.
///
/// `removed` has one flag per saliency-map element. On grids every entry is
/// solved within its own channel over the 4-neighbourhood (images) or
/// 6-neighbourhood (volumes) by Gauss-Seidel until the largest residual is at
/// most 1e-4. A removed point of a cloud takes the mean of its 4 nearest
/// kept points.
pub fn noisy_linear_imputation(
    x: &Tensor,
    modality: Modality,
    removed: &[bool],
    noise_sd: f64,
    seed: u64,
) -> Result<Tensor> {
    modality.check_input_shape(x.shape())?;
    let n_el = x.len() / modality.entries_per_element();
    if removed.len() != n_el {
        return Err(Error::ShapeMismatch {
            expected: vec![n_el],
            actual: vec![removed.len()],
        });
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidSpec(format!("noise sd must be non-negative, got {noise_sd}")));
    }
    let mut out = x.clone();
    if !removed.iter().any(|&r| r) {
        return Ok(out);
    }
    if removed.iter().all(|&r| r) {
        // no boundary at all: the global mean is the only defensible value
        log::warn!("every element removed; imputing the global mean");
        let mean = x.mean();
        out.data_mut().iter_mut().for_each(|v| *v = mean);
    } else {
        match modality {
            Modality::PointCloud => impute_points(x, removed, &mut out),
            Modality::Image => {
                let s = x.shape();
                impute_grid(&mut out, removed, &[s[0], s[1]], s[2]);
            }
            Modality::Volume => {
                let s = x.shape().to_vec();
                impute_grid(&mut out, removed, &s, 1);
            }
        }
    }
    if noise_sd > 0.0 {
        let mut r = rng::stream(seed, 0);
        let k = modality.entries_per_element();
        for (e, v) in out.data_mut().iter_mut().enumerate() {
            if removed[e / k] {
                *v += noise_sd * rng::normal(&mut r);
            }
        }
    }
    Ok(out)
}

/// `dims` are the spatial dims; entries are `(spatial..., channel)` with
/// `channels` trailing.
fn impute_grid(out: &mut Tensor, removed: &[bool], dims: &[usize], channels: usize) {
    let n_sp: usize = dims.iter().product();
    let st = strides(dims);
    let neighbours: Vec<Vec<usize>> = (0..n_sp)
        .map(|p| {
            let idx = unravel(p, dims);
            let mut v = Vec::new();
            for d in 0..dims.len() {
                if idx[d] > 0 {
                    v.push(p - st[d]);
                }
                if idx[d] + 1 < dims[d] {
                    v.push(p + st[d]);
                }
            }
            v
        })
        .collect();
    let data = out.data_mut();
    for ch in 0..channels {
        let entry = |p: usize| p * channels + ch;
        let unknown: Vec<usize> = (0..n_sp).filter(|&p| removed[entry(p)]).collect();
        if unknown.is_empty() {
            continue;
        }
        if unknown.len() == n_sp {
            // every pixel of this channel removed: fall back to the mean
            let mean = (0..n_sp).map(|p| data[entry(p)]).sum::<f64>() / n_sp as f64;
            unknown.iter().for_each(|&p| data[entry(p)] = mean);
            continue;
        }
        let kept: Vec<f64> = (0..n_sp).filter(|&p| !removed[entry(p)]).map(|p| data[entry(p)]).collect();
        let start = kept.iter().sum::<f64>() / kept.len() as f64;
        for &p in &unknown {
            data[entry(p)] = start;
        }
        for _ in 0..MAX_SWEEPS {
            for &p in &unknown {
                let nb = &neighbours[p];
                data[entry(p)] = nb.iter().map(|&q| data[entry(q)]).sum::<f64>() / nb.len() as f64;
            }
            let residual = unknown
                .iter()
                .map(|&p| {
                    let nb = &neighbours[p];
                    let m = nb.iter().map(|&q| data[entry(q)]).sum::<f64>() / nb.len() as f64;
                    (data[entry(p)] - m).abs()
                })
                .fold(0.0, f64::max);
            if residual <= TOLERANCE {
                break;
            }
        }
    }
}

fn impute_points(x: &Tensor, removed: &[bool], out: &mut Tensor) {
    let pts: Vec<&[f64]> = x.data().chunks(3).collect();
    let kept: Vec<usize> = (0..pts.len()).filter(|&i| !removed[i]).collect();
    let k = kept.len().min(4);
    let data = out.data_mut();
    for i in (0..pts.len()).filter(|&i| removed[i]) {
        let mut by_dist: Vec<(f64, usize)> = kept
            .iter()
            .map(|&j| (pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for d in 0..3 {
            data[i * 3 + d] = by_dist[..k].iter().map(|&(_, j)| pts[j][d]).sum::<f64>() / k as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_takes_neighbour_mean() {
        let mut x = Tensor::filled(&[3, 3, 1], 2.5);
        x.data_mut()[4] = -10.0;
        let mut removed = vec![false; 9];
        removed[4] = true;
        let y = noisy_linear_imputation(&x, Modality::Image, &removed, 0.0, 0).unwrap();
        assert!((y.data()[4] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ramp_is_restored() {
        // linear ramp along the first axis, an interior line removed
        let (w, h) = (10, 7);
        let x = Tensor::new(vec![w, h, 1], (0..w * h).map(|e| (e / h) as f64 * 0.3 + 1.0).collect()).unwrap();
        let removed: Vec<bool> = (0..w * h).map(|e| e / h == 4 || e / h == 5).collect();
        let mut broken = x.clone();
        for (v, &r) in broken.data_mut().iter_mut().zip(&removed) {
            if r {
                *v = 0.0;
            }
        }
        let y = noisy_linear_imputation(&broken, Modality::Image, &removed, 0.0, 0).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn volume_solution_is_harmonic() {
        let n = 5;
        let x = Tensor::new(vec![n, n, n], (0..125).map(|i| ((i * 31) % 7) as f64).collect()).unwrap();
        let removed: Vec<bool> = (0..125).map(|i| i % 3 == 0).collect();
        let y = noisy_linear_imputation(&x, Modality::Volume, &removed, 0.0, 0).unwrap();
        let dims = [n, n, n];
        for p in (0..125).filter(|&p| removed[p]) {
            let idx = unravel(p, &dims);
            let st = strides(&dims);
            let mut nb = Vec::new();
            for d in 0..3 {
                if idx[d] > 0 {
                    nb.push(y.data()[p - st[d]]);
                }
                if idx[d] + 1 < n {
                    nb.push(y.data()[p + st[d]]);
                }
            }
            let m = nb.iter().sum::<f64>() / nb.len() as f64;
            assert!((y.data()[p] - m).abs() <= 1e-4);
        }
        // kept voxels untouched
        for p in (0..125).filter(|&p| !removed[p]) {
            assert_eq!(y.data()[p], x.data()[p]);
        }
    }

    #[test]
    fn points_use_four_nearest_kept() {
        let x = Tensor::new(
            vec![6, 3],
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 50.0, 50.0, 50.0],
        )
        .unwrap();
        let removed = [true, false, false, false, false, false];
        let y = noisy_linear_imputation(&x, Modality::PointCloud, &removed, 0.0, 0).unwrap();
        assert_eq!(&y.data()[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let x = Tensor::filled(&[4, 4, 3], 1.0);
        let removed: Vec<bool> = (0..48).map(|e| e % 5 == 0).collect();
        let a = noisy_linear_imputation(&x, Modality::Image, &removed, 0.2, 9).unwrap();
        let b = noisy_linear_imputation(&x, Modality::Image, &removed, 0.2, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, noisy_linear_imputation(&x, Modality::Image, &removed, 0.2, 10).unwrap());
    }
}
