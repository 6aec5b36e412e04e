use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    /// `(W, H, C)` with `C` in {1, 3}.
    Image,
    /// `(X, Y, Z)`.
    Volume,
    /// `(N, 3)`.
    PointCloud,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Volume => "volume",
            Modality::PointCloud => "point_cloud",
        }
    }

    pub fn check_input_shape(self, shape: &[usize]) -> Result<()> {
        let ok = match self {
            Modality::Image => shape.len() == 3 && (shape[2] == 1 || shape[2] == 3),
            Modality::Volume => shape.len() == 3,
            Modality::PointCloud => shape.len() == 2 && shape[1] == 3,
        } && shape.iter().all(|&d| d > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::ModalityMismatch(format!(
                "shape {shape:?} is not a valid {} shape",
                self.as_str()
            )))
        }
    }

    /// Shape of a saliency map for an input of `input_shape`: congruent for
    /// grids, one value per point for point clouds.
    pub fn map_shape(self, input_shape: &[usize]) -> Vec<usize> {
        match self {
            Modality::PointCloud => vec![input_shape[0]],
            _ => input_shape.to_vec(),
        }
    }

    /// Number of input entries driven by one saliency-map element.
    pub fn entries_per_element(self) -> usize {
        match self {
            Modality::PointCloud => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    pub modality: Modality,
    pub data: Tensor,
    pub label: usize,
    pub id: String,
}

impl InputSample {
    pub fn new(modality: Modality, data: Tensor, label: usize, id: impl Into<String>) -> Result<Self> {
        modality.check_input_shape(data.shape())?;
        if !data.is_finite() {
            return Err(Error::NonFiniteInput("input sample".into()));
        }
        Ok(InputSample {
            modality,
            data,
            label,
            id: id.into(),
        })
    }

    pub fn map_shape(&self) -> Vec<usize> {
        self.modality.map_shape(self.data.shape())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rules() {
        assert!(Modality::Image.check_input_shape(&[8, 8, 3]).is_ok());
        assert!(Modality::Image.check_input_shape(&[8, 8, 2]).is_err());
        assert!(Modality::Volume.check_input_shape(&[4, 4, 4]).is_ok());
        assert!(Modality::PointCloud.check_input_shape(&[10, 3]).is_ok());
        assert!(Modality::PointCloud.check_input_shape(&[10, 2]).is_err());
        assert_eq!(Modality::PointCloud.map_shape(&[10, 3]), vec![10]);
    }

    #[test]
    fn rejects_non_finite() {
        let t = Tensor::new(vec![1, 3], vec![0.0, f64::NAN, 1.0]).unwrap();
        assert!(matches!(
            InputSample::new(Modality::PointCloud, t, 0, "a"),
            Err(Error::NonFiniteInput(_))
        ));
    }
}
