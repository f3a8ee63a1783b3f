//! Recurrent tip-position / contact-force estimator.

pub mod adam;
pub mod checkpoint;
pub mod lstm;
pub mod train;

pub use adam::Adam;
pub use checkpoint::TrainedModel;
pub use lstm::{lstm_backward, lstm_forward, lstm_forward_batch, mse_loss, ForwardCache, LstmParams, Mode, Weights, TENSOR_NAMES};
pub use train::{predict, predict_normalized, train, TrainConfig, TrainReport};
