use serde::{Deserialize, Serialize};

use super::Segmentation;
use crate::data::Modality;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicConfig {
    pub n_segments: usize,
    pub compactness: f64,
    pub iters: usize,
}

impl SlicConfig {
    pub fn default_for(modality: Modality, n_segments: usize) -> Self {
        SlicConfig {
            n_segments,
            compactness: if modality == Modality::Volume { 1.0 } else { 10.0 },
            iters: 10,
        }
    }
}

/// Grid counts per spatial axis whose product is at least `n`; leftovers go
/// to the first axis.
fn grid_counts(n: usize, dims: &[usize]) -> Vec<usize> {
    if dims.len() == 1 {
        return vec![n.clamp(1, dims[0])];
    }
    let rest: usize = dims[1..].iter().product();
    let ideal = (n as f64 * dims[0] as f64 / rest as f64).powf(1.0 / dims.len() as f64);
    let g0 = (ideal.ceil() as usize).clamp(1, dims[0]);
    let mut out = vec![g0];
    out.extend(grid_counts(n.div_ceil(g0), &dims[1..]));
    out
}

/// SLIC superpixels over the spatial grid of an image or volume.
///
/// Features are intensities scaled to a 0..100 range plus spatial position
/// weighted by `compactness / S`, with `S` the nominal segment spacing.
/// After the k-means iterations every label keeps its largest connected
/// component; other fragments join the largest neighbouring segment.
pub fn slic(x: &Tensor, modality: Modality, cfg: &SlicConfig) -> Result<Segmentation> {
    modality.check_input_shape(x.shape())?;
    let (dims, channels): (Vec<usize>, usize) = match modality {
        Modality::Image => (x.shape()[..2].to_vec(), x.shape()[2]),
        Modality::Volume => (x.shape().to_vec(), 1),
        Modality::PointCloud => {
            return Err(Error::WrongModality("slic needs an image or a volume".into()));
        }
    };
    let n_el: usize = dims.iter().product();
    if cfg.n_segments < 2 || cfg.n_segments > n_el {
        return Err(Error::TooManySegments {
            requested: cfg.n_segments,
            elements: n_el,
        });
    }
    let nd = dims.len();
    let data = x.data();
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = if hi > lo { 100.0 / (hi - lo) } else { 1.0 };
    let color = |e: usize, ch: usize| (data[e * channels + ch] - lo) * scale;
    let coord = |e: usize| -> Vec<f64> {
        crate::tensor::unravel(e, &dims).into_iter().map(|i| i as f64 + 0.5).collect()
    };

    let spacing = (n_el as f64 / cfg.n_segments as f64).powf(1.0 / nd as f64);
    let wspace = (cfg.compactness / spacing).powi(2);

    // centers: spatial coords followed by colors
    let counts = grid_counts(cfg.n_segments, &dims);
    let n_centers: usize = counts.iter().product();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_centers);
    for ci in 0..n_centers {
        let cell = crate::tensor::unravel(ci, &counts);
        let pos: Vec<f64> = (0..nd)
            .map(|d| (cell[d] as f64 + 0.5) * dims[d] as f64 / counts[d] as f64)
            .collect();
        // seed the color from the nearest element
        let e = pos
            .iter()
            .zip(&dims)
            .fold(0, |acc, (p, &n)| acc * n + (p.floor() as usize).min(n - 1));
        let mut c = pos;
        c.extend((0..channels).map(|ch| color(e, ch)));
        centers.push(c);
    }

    let coords: Vec<Vec<f64>> = (0..n_el).map(coord).collect();
    let mut labels = vec![0usize; n_el];
    for _ in 0..cfg.iters.max(1) {
        for e in 0..n_el {
            let mut best = (f64::INFINITY, 0);
            for (ci, c) in centers.iter().enumerate() {
                let ds: f64 = (0..nd).map(|d| (coords[e][d] - c[d]).powi(2)).sum();
                let dc: f64 = (0..channels).map(|ch| (color(e, ch) - c[nd + ch]).powi(2)).sum();
                let dist = dc + wspace * ds;
                if dist < best.0 {
                    best = (dist, ci);
                }
            }
            labels[e] = best.1;
        }
        let mut sums = vec![vec![0.0; nd + channels]; n_centers];
        let mut counts_c = vec![0usize; n_centers];
        for e in 0..n_el {
            let s = &mut sums[labels[e]];
            for d in 0..nd {
                s[d] += coords[e][d];
            }
            for ch in 0..channels {
                s[nd + ch] += color(e, ch);
            }
            counts_c[labels[e]] += 1;
        }
        for (ci, c) in centers.iter_mut().enumerate() {
            if counts_c[ci] > 0 {
                for (cv, s) in c.iter_mut().zip(&sums[ci]) {
                    *cv = s / counts_c[ci] as f64;
                }
            }
        }
    }

    let labels = enforce_connectivity(&labels, &dims);
    let seg = Segmentation::from_labels(&labels);
    // broadcast pixel labels over channels
    let assignment = match modality {
        Modality::Image => seg
            .assignment
            .iter()
            .flat_map(|&l| std::iter::repeat_n(l, channels))
            .collect(),
        _ => seg.assignment,
    };
    Ok(Segmentation {
        assignment,
        n_segments: seg.n_segments,
    })
}

fn neighbours(e: usize, dims: &[usize]) -> impl Iterator<Item = usize> + '_ {
    let idx = crate::tensor::unravel(e, dims);
    let strides = crate::tensor::strides(dims);
    (0..dims.len()).flat_map(move |d| {
        let mut v = Vec::with_capacity(2);
        if idx[d] > 0 {
            v.push(e - strides[d]);
        }
        if idx[d] + 1 < dims[d] {
            v.push(e + strides[d]);
        }
        v
    })
}

/// Splits labels into face-connected components. Each label keeps its
/// largest component; the others take the label of the largest adjacent
/// segment.
fn enforce_connectivity(labels: &[usize], dims: &[usize]) -> Vec<usize> {
    let n = labels.len();
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut size = 0;
        while let Some(e) = stack.pop() {
            size += 1;
            for nb in neighbours(e, dims) {
                if comp[nb] == usize::MAX && labels[nb] == labels[start] {
                    comp[nb] = id;
                    stack.push(nb);
                }
            }
        }
        comp_label.push(labels[start]);
        comp_size.push(size);
    }
    // the largest component of each label is its keeper (first on ties)
    let mut keeper = std::collections::HashMap::new();
    for (c, (&l, &s)) in comp_label.iter().zip(&comp_size).enumerate() {
        let entry = keeper.entry(l).or_insert(c);
        if s > comp_size[*entry] {
            *entry = c;
        }
    }
    let mut final_of: Vec<Option<usize>> = (0..comp_label.len())
        .map(|c| (keeper[&comp_label[c]] == c).then_some(c))
        .collect();
    // orphans merge into the largest neighbouring kept segment; repeat until
    // every orphan touches one
    let mut members = vec![Vec::new(); comp_label.len()];
    for (e, &c) in comp.iter().enumerate() {
        members[c].push(e);
    }
    loop {
        let mut changed = false;
        let mut pending = false;
        for c in 0..comp_label.len() {
            if final_of[c].is_some() {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &e in &members[c] {
                for nb in neighbours(e, dims) {
                    if let Some(target) = final_of[comp[nb]] {
                        let size = comp_size[target];
                        if best.is_none_or(|(bs, bt)| size > bs || (size == bs && target < bt)) {
                            best = Some((size, target));
                        }
                    }
                }
            }
            match best {
                Some((_, target)) => {
                    final_of[c] = Some(target);
                    comp_size[target] += comp_size[c];
                    changed = true;
                }
                None => pending = true,
            }
        }
        if !pending || !changed {
            break;
        }
    }
    comp.iter()
        .map(|&c| final_of[c].unwrap_or(c))
        .collect()
}
