//! Saliency-map evaluation: twenty faithfulness, robustness and complexity
//! metrics over image, volume and point-cloud inputs, an aggregate-then-rank
//! scheme that turns raw scores into method rankings, and statistics that
//! quantify how much metrics of one criterion disagree.

pub mod data;
pub mod error;
pub mod exec;
pub mod io;
pub mod meta;
pub mod metrics;
pub mod perturb;
pub mod ranking;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod tinynet;
pub mod xai;

pub use error::{Error, Result};
pub use tensor::Tensor;
