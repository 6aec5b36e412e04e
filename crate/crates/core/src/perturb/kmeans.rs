use rand::Rng as _;

use super::Segmentation;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Result of a traced k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    pub segmentation: Segmentation,
    /// Within-cluster sum of squares after each assignment step.
    pub sse: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means on an `(N, 3)` cloud with farthest-point initialization
/// from a seeded first center.
pub fn kmeans_points(cloud: &Tensor, k: usize, iters: usize, seed: u64) -> Result<Segmentation> {
    Ok(kmeans_points_traced(cloud, k, iters, seed)?.segmentation)
}

pub fn kmeans_points_traced(cloud: &Tensor, k: usize, iters: usize, seed: u64) -> Result<KMeansTrace> {
    let shape = cloud.shape();
    if shape.len() != 2 || shape[1] != 3 {
        return Err(Error::WrongModality(format!("k-means needs an (N, 3) cloud, got {shape:?}")));
    }
    let n = shape[0];
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { k, points: n });
    }
    let pts: Vec<&[f64]> = cloud.data().chunks(3).collect();
    let mut r = rng::stream(seed, 0);
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
    let first = r.random_range(0..n);
    centers.push([pts[first][0], pts[first][1], pts[first][2]]);
    let mut nearest: Vec<f64> = pts.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        // farthest point; lowest index on ties
        let mut far = 0;
        for i in 1..n {
            if nearest[i] > nearest[far] {
                far = i;
            }
        }
        let c = [pts[far][0], pts[far][1], pts[far][2]];
        for (d, p) in nearest.iter_mut().zip(&pts) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }

    let mut labels = vec![usize::MAX; n];
    let mut sse = Vec::new();
    for _ in 0..iters.max(1) {
        let mut changed = false;
        let mut total = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            total += best.0;
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        sse.push(total);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            for d in 0..3 {
                sums[l][d] += p[d];
            }
            counts[l] += 1;
        }
        // an empty cluster keeps its previous center
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..3 {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
    }
    Ok(KMeansTrace {
        segmentation: Segmentation::from_labels(&labels),
        sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> (Tensor, Vec<usize>) {
        let mut r = rng::stream(seed, 1);
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for b in 0..16 {
            let center = [(b % 4) as f64 * 10.0, (b / 4) as f64 * 10.0, (b % 3) as f64 * 10.0];
            for _ in 0..8 {
                for c in center {
                    data.push(c + 0.1 * rng::normal(&mut r));
                }
                truth.push(b);
            }
        }
        (Tensor::new(vec![truth.len(), 3], data).unwrap(), truth)
    }

    #[test]
    fn recovers_separated_blobs() {
        let (cloud, truth) = blobs(3);
        let seg = kmeans_points(&cloud, 16, 20, 7).unwrap();
        assert_eq!(seg.n_segments, 16);
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                assert_eq!(truth[i] == truth[j], seg.assignment[i] == seg.assignment[j]);
            }
        }
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let cloud = Tensor::new(vec![5, 3], (0..15).map(|v| v as f64 * v as f64).collect()).unwrap();
        let seg = kmeans_points(&cloud, 5, 10, 0).unwrap();
        assert_eq!(seg.n_segments, 5);
        let mut a = seg.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn sse_never_increases() {
        let mut r = rng::stream(11, 0);
        let cloud = Tensor::new(vec![300, 3], rng::normals(&mut r, 900, 1.0)).unwrap();
        let trace = kmeans_points_traced(&cloud, 16, 50, 2).unwrap();
        assert!(trace.sse.len() > 1);
        for w in trace.sse.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn too_few_points() {
        let cloud = Tensor::zeros(&[4, 3]);
        assert!(matches!(kmeans_points(&cloud, 16, 5, 0), Err(Error::TooFewPoints { .. })));
    }
}
