use std::time::Instant;

use ndarray::{s, Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::lstm::{lstm_backward, lstm_forward_batch, mse_loss, LstmParams, Mode};
use crate::dataset::{SequenceDataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Samples per training window (100 samples = 5 s at 20 Hz).
    pub seq_window_len: usize,
    /// Distance between window starts; each epoch also draws a random phase.
    pub window_stride: usize,
    pub batch_size: usize,
    /// Leading steps of each window excluded from the loss.
    pub burn_in: usize,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Evaluate the test split after every epoch.
    pub track_validation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 50,
            dropout_rate: 0.1,
            epochs: 30,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seq_window_len: 100,
            window_stride: 100,
            batch_size: 16,
            burn_in: 0,
            clip_norm: Some(1.0),
            seed: 0,
            track_validation: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_dim == 0 || self.seq_window_len == 0 || self.window_stride == 0 || self.batch_size == 0 {
            return bad("dimensions, window length, stride and batch size must be positive");
        }
        if self.burn_in >= self.seq_window_len {
            return bad("burn_in must be shorter than the window");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean training-mode batch loss per epoch (normalised units).
    pub train_loss: Vec<f64>,
    /// Eval-mode loss on the test split per epoch; empty when not tracked.
    pub val_loss: Vec<f64>,
    /// Eval-mode loss over the training split before the first update.
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub params: LstmParams,
    pub wall_time_s: f64,
    /// Epoch at which a non-finite loss stopped training.
    pub diverged_at: Option<usize>,
}

/// Window starts of length `len` tiling each training segment from `phase`.
fn window_starts(ds: &SequenceDataset, len: usize, stride: usize, phase: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    for (start, seg_len) in ds.segments(Split::Train) {
        if seg_len < len {
            continue;
        }
        let mut s = start + phase.min(seg_len - len);
        while s + len <= start + seg_len {
            starts.push(s);
            s += stride;
        }
    }
    starts
}

fn gather(m: &Array2<f64>, starts: &[usize], len: usize) -> Array3<f64> {
    let mut out = Array3::zeros((len, starts.len(), m.ncols()));
    for (b, &s0) in starts.iter().enumerate() {
        out.slice_mut(s![.., b, ..]).assign(&m.slice(s![s0..s0 + len, ..]));
    }
    out
}

fn mse_rows(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}

/// Adam over shuffled windows of the training split. The test split is only
/// ever evaluated, never used for updates.
pub fn train(ds: &SequenceDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if ds.train_rows.is_empty() {
        return Err(Error::Shape("empty training split".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = LstmParams::init(
        ds.n_features(),
        cfg.hidden_dim,
        ds.n_targets(),
        cfg.dropout_rate,
        rng.next_u64(),
    );
    let mut opt = Adam::new(&params.weights, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    let train_truth = SequenceDataset::select_rows(&ds.targets, &ds.train_rows);
    let test_truth = SequenceDataset::select_rows(&ds.targets, &ds.test_rows);
    let initial_train_loss = mse_rows(&predict_normalized(&params, ds, Split::Train)?, &train_truth);

    let len = cfg.seq_window_len;
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::new();
    let mut diverged_at = None;

    'epochs: for epoch in 0..cfg.epochs {
        let phase = rng.random_range(0..cfg.window_stride);
        let mut starts = window_starts(ds, len, cfg.window_stride, phase);
        if starts.is_empty() {
            return Err(Error::Shape(format!("training split shorter than one {len}-sample window")));
        }
        starts.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in starts.chunks(cfg.batch_size) {
            let x = gather(&ds.features, chunk, len);
            let y = gather(&ds.targets, chunk, len);
            let (pred, cache) = lstm_forward_batch(&params, x.view(), Mode::Train { seed: rng.next_u64() })?;
            let (loss, d_out) = mse_loss(pred.view(), y.view(), cfg.burn_in)?;
            if !loss.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            let mut grads = lstm_backward(&params, &cache, d_out.view())?;
            if let Some(max) = cfg.clip_norm {
                let n = grads.norm();
                if n > max {
                    grads.scale(max / n);
                }
            }
            opt.update(&mut params.weights, &grads);
            if !params.weights.all_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            sum += loss;
            batches += 1;
        }
        train_loss.push(sum / batches as f64);
        if cfg.track_validation && !ds.test_rows.is_empty() {
            val_loss.push(mse_rows(&predict_normalized(&params, ds, Split::Test)?, &test_truth));
        }
        log::debug!("epoch {epoch}: train {:.5}", train_loss[epoch]);
    }

    let final_train_loss = if diverged_at.is_some() {
        f64::NAN
    } else {
        mse_rows(&predict_normalized(&params, ds, Split::Train)?, &train_truth)
    };
    Ok(TrainReport {
        train_loss,
        val_loss,
        initial_train_loss,
        final_train_loss,
        params,
        wall_time_s: started.elapsed().as_secs_f64(),
        diverged_at,
    })
}

/// Eval-mode outputs for the rows of `split`, in normalised target units.
///
/// The network runs statefully over the whole record from its first row, as
/// a deployed estimator would, and the rows of the split are read out.
pub fn predict_normalized(params: &LstmParams, ds: &SequenceDataset, split: Split) -> Result<Array2<f64>> {
    params.validate()?;
    if params.weights.input_dim() != ds.n_features() || params.weights.output_dim() != ds.n_targets() {
        return Err(Error::Shape(format!(
            "network is {}->{}, dataset is {}->{}",
            params.weights.input_dim(),
            params.weights.output_dim(),
            ds.n_features(),
            ds.n_targets()
        )));
    }
    let rows = ds.rows(split);
    let Some(&last) = rows.iter().max() else {
        return Ok(Array2::zeros((0, ds.n_targets())));
    };
    let x = ds.features.slice(s![..=last, ..]);
    let x3 = x.insert_axis(Axis(1));
    let (y, _) = lstm_forward_batch(params, x3, Mode::Eval)?;
    let y2 = y.index_axis(Axis(1), 0).to_owned();
    Ok(y2.select(Axis(0), rows))
}

/// Eval-mode predictions for `split` in physical units.
pub fn predict(params: &LstmParams, ds: &SequenceDataset, split: Split) -> Result<Array2<f64>> {
    Ok(ds.denormalize_targets(&predict_normalized(params, ds, split)?))
}
