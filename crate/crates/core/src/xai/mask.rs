use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::tensor::{unravel, Tensor};

/// Assignment of every saliency-map element to a feature group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub assignment: Vec<usize>,
    pub n_groups: usize,
}

impl FeatureMask {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n_groups = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_groups];
        for &g in &assignment {
            seen[g] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSpec("feature group ids must be contiguous from 0".into()));
        }
        Ok(FeatureMask { assignment, n_groups })
    }

    /// Input with every group whose flag is off set to `baseline`.
    pub fn apply(&self, x: &Tensor, modality: Modality, on: &[bool], baseline: f64) -> Tensor {
        let k = modality.entries_per_element();
        let mut out = x.clone();
        for (e, v) in out.data_mut().iter_mut().enumerate() {
            if !on[self.assignment[e / k]] {
                *v = baseline;
            }
        }
        out
    }

    /// Copies per-group values onto their elements.
    pub fn broadcast(&self, per_group: &[f64], map_shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(map_shape, self.assignment.iter().map(|&g| per_group[g]).collect())
    }
}

/// Grid patches of edge `patch` over the spatial axes (every channel of a
/// pixel shares its group; edge patches may be smaller) or one group per
/// point.
pub fn build_feature_mask(modality: Modality, shape: &[usize], patch: usize) -> Result<FeatureMask> {
    modality.check_input_shape(shape)?;
    if patch == 0 {
        return Err(Error::InvalidSpec("patch size must be at least 1".into()));
    }
    let assignment = match modality {
        Modality::PointCloud => (0..shape[0]).collect(),
        Modality::Image | Modality::Volume => {
            let spatial = if modality == Modality::Image { &shape[..2] } else { shape };
            let channels = if modality == Modality::Image { shape[2] } else { 1 };
            let groups: Vec<usize> = spatial.iter().map(|d| d.div_ceil(patch)).collect();
            let n_sp: usize = spatial.iter().product();
            (0..n_sp)
                .flat_map(|p| {
                    let idx = unravel(p, spatial);
                    let g = idx.iter().zip(&groups).fold(0, |acc, (i, n)| acc * n + i / patch);
                    std::iter::repeat_n(g, channels)
                })
                .collect()
        }
    };
    FeatureMask::new(assignment)
}
