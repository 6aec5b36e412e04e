//! A minimal differentiable network family: dense MLPs and small 2D/3D
//! convolution stacks with a reverse pass over a recorded tape.
//!
//! Internally every activation is channel-first. The [`InputLayout`] maps a
//! sample tensor (`(W, H, C)` images, `(X, Y, Z)` volumes, `(N, 3)` point
//! clouds) onto that layout and maps gradients back.

mod layers;
mod network;
mod recipes;
mod train;

pub use layers::LayerSpec;
pub use network::{InputLayout, Network, Tape};
pub use recipes::{Architecture, Recipe, SyntheticDataset};
pub use train::{accuracy, train, TrainConfig};
