use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::{ExperimentSpec, Variant};
use crate::actuator::ContactLocation;
use crate::dataset::{csv_err, csv_writer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mean, std) = mean_std(xs);
        Self { mean, std }
    }
}

/// Test-split metrics of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub rmse_per_axis: Vec<f64>,
    pub rmse_plane: Option<f64>,
    pub mean_abs_err: f64,
    pub std_abs_err: f64,
    /// Test-split ground-truth range per target.
    pub ranges: Vec<f64>,
    /// Diagonal of the per-axis ranges, for tip targets.
    pub plane_range: Option<f64>,
    /// `None` for a target whose test range is zero.
    pub percent_of_range: Vec<Option<f64>>,
    pub plane_percent_of_range: Option<f64>,
    pub initial_train_loss: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
}

/// Seed-aggregated metrics of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub scenario: Option<ContactLocation>,
    pub channels: usize,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub rmse_per_axis: Vec<MeanStd>,
    pub rmse_plane: Option<MeanStd>,
    pub mean_abs_err: Option<MeanStd>,
    pub std_abs_err: Option<MeanStd>,
    /// Over the seeds where the percentage is defined.
    pub percent_of_range: Vec<Option<MeanStd>>,
    pub plane_percent_of_range: Option<MeanStd>,
    pub per_seed: Vec<SeedMetrics>,
}

impl MetricsReport {
    pub fn aggregate(v: Variant, feature_names: Vec<String>, target_names: Vec<String>, per_seed: Vec<SeedMetrics>) -> Self {
        let n_axes = per_seed.first().map_or(0, |m| m.rmse_per_axis.len());
        let col = |f: &dyn Fn(&SeedMetrics) -> f64| MeanStd::of(per_seed.iter().map(f));
        let opt = |f: &dyn Fn(&SeedMetrics) -> Option<f64>| {
            let xs: Option<Vec<f64>> = per_seed.iter().map(f).collect();
            xs.filter(|x| !x.is_empty()).map(MeanStd::of)
        };
        let any = !per_seed.is_empty();
        Self {
            variant: v.to_string(),
            scenario: v.scenario,
            channels: v.channels,
            feature_names,
            target_names,
            rmse_per_axis: (0..n_axes).map(|a| col(&|m| m.rmse_per_axis[a])).collect(),
            rmse_plane: opt(&|m| m.rmse_plane),
            mean_abs_err: any.then(|| col(&|m| m.mean_abs_err)),
            std_abs_err: any.then(|| col(&|m| m.std_abs_err)),
            percent_of_range: (0..n_axes)
                .map(|a| {
                    let xs: Vec<f64> = per_seed.iter().filter_map(|m| m.percent_of_range[a]).collect();
                    (!xs.is_empty()).then(|| MeanStd::of(xs))
                })
                .collect(),
            plane_percent_of_range: opt(&|m| m.plane_percent_of_range),
            per_seed,
        }
    }

    /// Seed-mean plane RMSE as a fraction of the seed-mean plane range.
    pub fn plane_fraction_of_range(&self) -> Option<f64> {
        let rmse = self.rmse_plane?.mean;
        let ranges: Option<Vec<f64>> = self.per_seed.iter().map(|m| m.plane_range).collect();
        Some(rmse / MeanStd::of(ranges?).mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub variant: String,
    pub seed: u64,
    pub stage: String,
    pub error: String,
}

impl RunFailure {
    pub(crate) fn new(v: &Variant, seed: u64, stage: &str, e: &Error) -> Self {
        log::warn!("{v} seed {seed} failed at {stage}: {e}");
        Self {
            variant: v.to_string(),
            seed,
            stage: stage.to_string(),
            error: e.to_string(),
        }
    }
}

/// Test-split predictions and loss curves of one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub variant: String,
    pub seed: u64,
    pub time_s: Vec<f64>,
    pub target_names: Vec<String>,
    pub truth: Array2<f64>,
    pub prediction: Array2<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

impl RunArtifacts {
    /// `t_s`, then `<target>_true` columns, then `<target>_pred` columns.
    pub fn write_predictions(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let mut header = vec!["t_s".to_string()];
        header.extend(self.target_names.iter().map(|n| format!("{n}_true")));
        header.extend(self.target_names.iter().map(|n| format!("{n}_pred")));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (i, t) in self.time_s.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.truth.row(i).iter().map(f64::to_string));
            rec.extend(self.prediction.row(i).iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `epoch,train_loss,val_loss`; the validation column is empty when untracked.
    pub fn write_loss_curve(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["epoch", "train_loss", "val_loss"]).map_err(|e| csv_err(path, e))?;
        for (i, l) in self.train_loss.iter().enumerate() {
            let v = self.val_loss.get(i).map_or(String::new(), f64::to_string);
            w.write_record([i.to_string(), l.to_string(), v]).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Configuration echo.
    pub spec: ExperimentSpec,
    pub variants: Vec<MetricsReport>,
    pub failures: Vec<RunFailure>,
    #[serde(skip)]
    pub artifacts: Vec<RunArtifacts>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn variant(&self, label: &str) -> Option<&MetricsReport> {
        self.variants.iter().find(|v| v.variant == label)
    }

    /// Writes `report.json` plus `<variant>/seed<k>/{predictions,loss_curve}.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))?;
        for a in &self.artifacts {
            let sub = dir.join(&a.variant).join(format!("seed{}", a.seed));
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            a.write_predictions(&sub.join("predictions.csv"))?;
            a.write_loss_curve(&sub.join("loss_curve.csv"))?;
        }
        Ok(())
    }
}
