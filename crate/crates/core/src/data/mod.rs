//! Shared data model: modalities, samples, saliency maps, the model oracle
//! interface, metric identities and the score tensor.

mod ids;
mod model;
mod sample;
mod saliency;
mod scores;

pub use ids::{Criterion, CriterionSet, MetricId, Orientation};
pub use model::{argmax, softmax, ModelOracle};
pub use sample::{InputSample, Modality};
pub use saliency::{postprocess_saliency, validate_pair, SaliencyMap};
pub use scores::{MetricAxis, ScoreTensor};
