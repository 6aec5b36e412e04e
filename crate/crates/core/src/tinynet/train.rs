use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::recipes::{Recipe, SyntheticDataset};
use crate::data::argmax;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Settings that reliably fit each synthetic recipe.
    pub fn default_for(recipe: Recipe, seed: u64) -> Self {
        match recipe {
            Recipe::BrightQuadrant | Recipe::BrightOctant => TrainConfig { epochs: 30, lr: 0.02, seed },
            Recipe::Primitives => TrainConfig { epochs: 60, lr: 0.05, seed },
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            lr: 0.02,
            seed: 0,
        }
    }
}

/// Per-sample SGD on softmax cross-entropy. The visiting order of each epoch
/// is drawn from its own stream, so training is reproducible bit for bit.
pub fn train(net: &Network, data: &SyntheticDataset, cfg: &TrainConfig) -> Result<Network> {
    if data.is_empty() {
        return Err(Error::EmptyGroup("training set is empty".into()));
    }
    let mut net = net.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, epoch as u64);
        order.shuffle(&mut r);
        let mut total = 0.0;
        for &i in &order {
            let s = &data.samples[i];
            let (loss, grad) = net.loss_gradient(&s.data, s.label)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss;
            if cfg.lr != 0.0 {
                for (w, g) in net.weights.iter_mut().zip(&grad) {
                    *w -= cfg.lr * g;
                }
            }
        }
        if !net.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        log::debug!("epoch {epoch}: mean loss {:.5}", total / data.len() as f64);
    }
    Ok(net)
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn accuracy(net: &Network, data: &SyntheticDataset) -> Result<f64> {
    let mut hits = 0;
    for s in &data.samples {
        if argmax(&net.forward(&s.data)?) == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}
