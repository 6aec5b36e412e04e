use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng as _;

use super::mask::FeatureMask;
use super::XaiConfig;
use crate::data::{Modality, ModelOracle};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

const LASSO_SWEEPS: usize = 10_000;
const LASSO_TOL: f64 = 1e-12;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a coalition of size `s` out of `g` groups.
pub fn shapley_kernel_weight(g: usize, s: usize) -> f64 {
    (g - 1) as f64 / (binomial(g, s) * s as f64 * (g - s) as f64)
}

fn weighted_center(z: &[Vec<f64>], y: &[f64], w: &[f64]) -> (Vec<f64>, f64) {
    let total: f64 = w.iter().sum();
    let p = z.first().map_or(0, Vec::len);
    let mut zm = vec![0.0; p];
    let mut ym = 0.0;
    for ((row, &yi), &wi) in z.iter().zip(y).zip(w) {
        for (m, v) in zm.iter_mut().zip(row) {
            *m += wi * v / total;
        }
        ym += wi * yi / total;
    }
    (zm, ym)
}

/// Weighted lasso with intercept by cyclic coordinate descent, minimizing
/// `sum w_i (y_i - b - z_i.beta)^2 / (2 sum w) + alpha |beta|_1`.
pub fn lasso(z: &[Vec<f64>], y: &[f64], w: &[f64], alpha: f64) -> Vec<f64> {
    let p = z.first().map_or(0, Vec::len);
    let total: f64 = w.iter().sum();
    let (zm, ym) = weighted_center(z, y, w);
    let zc: Vec<Vec<f64>> = z.iter().map(|r| r.iter().zip(&zm).map(|(v, m)| v - m).collect()).collect();
    let wn: Vec<f64> = w.iter().map(|v| v / total).collect();
    let norms: Vec<f64> = (0..p).map(|j| zc.iter().zip(&wn).map(|(r, wi)| wi * r[j] * r[j]).sum()).collect();
    let mut beta = vec![0.0; p];
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    for _ in 0..LASSO_SWEEPS {
        let mut delta: f64 = 0.0;
        for j in 0..p {
            if norms[j] <= 0.0 {
                continue;
            }
            let rho: f64 = zc.iter().zip(&resid).zip(&wn).map(|((r, e), wi)| wi * r[j] * (e + r[j] * beta[j])).sum();
            let new = rho.signum() * (rho.abs() - alpha).max(0.0) / norms[j];
            let change = new - beta[j];
            if change != 0.0 {
                for (e, r) in resid.iter_mut().zip(&zc) {
                    *e -= change * r[j];
                }
                beta[j] = new;
                delta = delta.max(change.abs());
            }
        }
        if delta < LASSO_TOL {
            break;
        }
    }
    beta
}

/// Weighted ridge regression with an unpenalized intercept.
fn ridge(z: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let p = z.first().map_or(0, Vec::len);
    let (zm, ym) = weighted_center(z, y, w);
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut atb = DVector::<f64>::zeros(p);
    for ((row, &yi), &wi) in z.iter().zip(y).zip(w) {
        let r: Vec<f64> = row.iter().zip(&zm).map(|(v, m)| v - m).collect();
        for a in 0..p {
            atb[a] += wi * r[a] * (yi - ym);
            for b in 0..p {
                ata[(a, b)] += wi * r[a] * r[b];
            }
        }
    }
    for a in 0..p {
        ata[(a, a)] += lambda;
    }
    ata.cholesky()
        .map(|c| c.solve(&atb).iter().copied().collect())
        .ok_or_else(|| Error::SingularFit(format!("ridge system with lambda {lambda}")))
}

/// LIME: a linear surrogate fitted on random on/off group perturbations
/// (keep probability 0.5, off groups set to the baseline), weighted by an
/// exponential kernel on the cosine distance to the unperturbed input. Grids
/// use the lasso and clouds the ridge; a singular ridge fit is retried once
/// with ten times the penalty.
pub fn lime(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    mask: &FeatureMask,
    cfg: &XaiConfig,
) -> Result<Tensor> {
    let g = mask.n_groups;
    if g < 2 {
        return Err(Error::InvalidSpec("LIME needs at least two feature groups".into()));
    }
    let n = if cfg.n_samples == 0 { 4 * g } else { cfg.n_samples };
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for s in 0..n {
        let mut r = rng::stream(cfg.seed, s as u64);
        let on: Vec<bool> = (0..g).map(|_| r.random_bool(0.5)).collect();
        let k = on.iter().filter(|&&b| b).count();
        let distance = 1.0 - (k as f64 / g as f64).sqrt();
        w.push((-(distance * distance) / (cfg.kernel_width * cfg.kernel_width)).exp());
        y.push(model.logit(&mask.apply(x, modality, &on, cfg.baseline), target)?);
        z.push(on.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<f64>>());
    }
    let coef = match modality {
        Modality::PointCloud => match ridge(&z, &y, &w, cfg.regularization) {
            Ok(c) => c,
            Err(Error::SingularFit(_)) => {
                log::warn!("singular LIME fit; retrying with a tenfold penalty");
                ridge(&z, &y, &w, (cfg.regularization * 10.0).max(1e-8))?
            }
            Err(e) => return Err(e),
        },
        _ => lasso(&z, &y, &w, cfg.regularization),
    };
    mask.broadcast(&coef, modality.map_shape(x.shape()))
}

/// Accumulates the constrained weighted least-squares system in which the
/// last coefficient is eliminated by `sum phi = total`.
struct ShapSystem {
    ata: DMatrix<f64>,
    atb: DVector<f64>,
    g: usize,
    total: f64,
}

impl ShapSystem {
    fn new(g: usize, total: f64) -> Self {
        ShapSystem {
            ata: DMatrix::zeros(g - 1, g - 1),
            atb: DVector::zeros(g - 1),
            g,
            total,
        }
    }

    fn add(&mut self, z: &[bool], y: f64, w: f64) {
        let last = f64::from(u8::from(z[self.g - 1]));
        let a: Vec<f64> = (0..self.g - 1).map(|j| f64::from(u8::from(z[j])) - last).collect();
        let t = y - last * self.total;
        for i in 0..self.g - 1 {
            if a[i] == 0.0 {
                continue;
            }
            self.atb[i] += w * a[i] * t;
            for j in 0..self.g - 1 {
                self.ata[(i, j)] += w * a[i] * a[j];
            }
        }
    }

    fn solve(self) -> Result<Vec<f64>> {
        let phi = self
            .ata
            .clone()
            .cholesky()
            .map(|c| c.solve(&self.atb))
            .or_else(|| self.ata.clone().lu().solve(&self.atb))
            .ok_or_else(|| Error::SingularFit("Kernel SHAP system".into()))?;
        let mut out: Vec<f64> = phi.iter().copied().collect();
        out.push(self.total - out.iter().sum::<f64>());
        Ok(out)
    }
}

/// Kernel SHAP: weighted least squares with Shapley kernel weights under
/// the efficiency constraint. Up to `exact_max_groups` groups every
/// coalition is enumerated, which recovers the exact Shapley values; beyond
/// that coalitions are drawn from the kernel distribution.
pub fn kernel_shap(
    model: &dyn ModelOracle,
    x: &Tensor,
    modality: Modality,
    target: usize,
    mask: &FeatureMask,
    cfg: &XaiConfig,
) -> Result<Tensor> {
    let g = mask.n_groups;
    if g < 2 {
        return Err(Error::InvalidSpec("Kernel SHAP needs at least two feature groups".into()));
    }
    let value = |on: &[bool]| model.logit(&mask.apply(x, modality, on, cfg.baseline), target);
    let empty = value(&vec![false; g])?;
    let full = value(&vec![true; g])?;
    let mut sys = ShapSystem::new(g, full - empty);
    if g <= cfg.exact_max_groups.min(30) {
        for bits in 1..(1u64 << g) - 1 {
            let on: Vec<bool> = (0..g).map(|j| bits >> j & 1 == 1).collect();
            let s = on.iter().filter(|&&b| b).count();
            sys.add(&on, value(&on)? - empty, shapley_kernel_weight(g, s));
        }
    } else {
        let n = if cfg.n_samples == 0 { 4 * g } else { cfg.n_samples };
        let size_w: Vec<f64> = (1..g).map(|s| (g - 1) as f64 / (s * (g - s)) as f64).collect();
        let z_total: f64 = size_w.iter().sum();
        for i in 0..n {
            let mut r = rng::stream(cfg.seed, i as u64);
            let mut u = r.random_range(0.0..z_total);
            let mut s = g - 1;
            for (k, wk) in size_w.iter().enumerate() {
                if u < *wk {
                    s = k + 1;
                    break;
                }
                u -= wk;
            }
            let mut on = vec![false; g];
            for j in index::sample(&mut r, g, s) {
                on[j] = true;
            }
            sys.add(&on, value(&on)? - empty, 1.0);
        }
    }
    let phi = sys.solve()?;
    mask.broadcast(&phi, modality.map_shape(x.shape()))
}
