//! Versioned JSON checkpoints holding weights and normalisation statistics.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::lstm::{LstmParams, Weights};
use crate::dataset::{ColumnStats, SequenceDataset};
use crate::error::{Error, Result};

pub const FORMAT: &str = "soft-eit-lstm";
pub const FORMAT_VERSION: u32 = 1;

/// A trained estimator: network weights plus the statistics needed to map
/// raw features in and predictions out.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: LstmParams,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub feature_stats: Vec<ColumnStats>,
    pub target_stats: Vec<ColumnStats>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    dropout_rate: f64,
    feature_names: Vec<String>,
    target_names: Vec<String>,
    feature_stats: Vec<ColumnStats>,
    target_stats: Vec<ColumnStats>,
    w_x: Vec<f64>,
    w_h: Vec<f64>,
    b: Vec<f64>,
    w_y: Vec<f64>,
    b_y: Vec<f64>,
}

impl TrainedModel {
    pub fn new(params: LstmParams, ds: &SequenceDataset) -> Self {
        Self {
            params,
            feature_names: ds.feature_names.clone(),
            target_names: ds.target_names.clone(),
            feature_stats: ds.feature_stats.clone(),
            target_stats: ds.target_stats.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let w = &self.params.weights;
        let [w_x, w_h, b, w_y, b_y] = w.slices().map(<[f64]>::to_vec);
        let ck = Checkpoint {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            input_dim: w.input_dim(),
            hidden_dim: w.hidden_dim(),
            output_dim: w.output_dim(),
            dropout_rate: self.params.dropout_rate,
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            feature_stats: self.feature_stats.clone(),
            target_stats: self.target_stats.clone(),
            w_x,
            w_h,
            b,
            w_y,
            b_y,
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT || ck.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{FORMAT_VERSION})",
                ck.format, ck.version
            )));
        }
        let (f, h, d) = (ck.input_dim, ck.hidden_dim, ck.output_dim);
        let shape_err = |e: ndarray::ShapeError| Error::Shape(format!("checkpoint tensor: {e}"));
        let weights = Weights {
            w_x: Array2::from_shape_vec((4 * h, f), ck.w_x).map_err(shape_err)?,
            w_h: Array2::from_shape_vec((4 * h, h), ck.w_h).map_err(shape_err)?,
            b: Array1::from(ck.b),
            w_y: Array2::from_shape_vec((d, h), ck.w_y).map_err(shape_err)?,
            b_y: Array1::from(ck.b_y),
        };
        let params = LstmParams {
            weights,
            dropout_rate: ck.dropout_rate,
        };
        params.validate()?;
        if ck.feature_stats.len() != f || ck.target_stats.len() != d {
            return Err(Error::Shape("checkpoint statistics do not match dimensions".into()));
        }
        Ok(Self {
            params,
            feature_names: ck.feature_names,
            target_names: ck.target_names,
            feature_stats: ck.feature_stats,
            target_stats: ck.target_stats,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Whether the model was trained on the same columns and statistics as `ds`.
    pub fn matches(&self, ds: &SequenceDataset) -> bool {
        self.feature_names == ds.feature_names && self.target_names == ds.target_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TrainedModel {
        TrainedModel {
            params: LstmParams::init(3, 5, 2, 0.1, 42),
            feature_names: vec!["p".into(), "z1".into(), "z2".into()],
            target_names: vec!["y".into(), "z".into()],
            feature_stats: vec![ColumnStats { mean: 1.2, std: 0.1 }; 3],
            target_stats: vec![ColumnStats { mean: 30.0, std: 12.5 }; 2],
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let text = model().to_json().unwrap();
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(TrainedModel::from_json(&bumped).is_err());
        let lied = text.replace("\"hidden_dim\": 5", "\"hidden_dim\": 6");
        assert!(TrainedModel::from_json(&lied).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model().save(&path).unwrap();
        assert_eq!(TrainedModel::load(&path).unwrap(), model());
    }
}
