//! Learnability check: the network learns to copy one of its inputs.
//!
//! cargo run --release --example train_identity

use ndarray::{s, Array2};
use soft_eit::dataset::{split_and_normalize, Aligned, SplitMode};
use soft_eit::estimator::{train, TrainConfig};

fn main() -> soft_eit::Result<()> {
    let t = 2000;
    let x = Array2::from_shape_fn((t, 3), |(i, j)| {
        let u = i as f64 * 0.05;
        [(0.7 * u).sin(), (1.3 * u).cos() + 0.3 * (0.2 * u).sin(), (0.31 * u).sin() * (0.9 * u).cos()][j]
    });
    let y = x.slice(s![.., 1..2]).to_owned();
    let features = Aligned { values: x, names: vec!["a".into(), "b".into(), "c".into()], rate_hz: 20.0, t0_s: 0.0 };
    let targets = Aligned { values: y, names: vec!["b_copy".into()], rate_hz: 20.0, t0_s: 0.0 };
    let ds = split_and_normalize(&features, &targets, 0.2, &SplitMode::ChronologicalTail)?;

    let cfg = TrainConfig {
        hidden_dim: 16,
        dropout_rate: 0.0,
        epochs: 200,
        learning_rate: 5e-3,
        seq_window_len: 50,
        window_stride: 50,
        ..TrainConfig::default()
    };
    let rep = train(&ds, &cfg)?;
    // targets are z-scored, so the RMSE is already a fraction of the target std
    let rmse = rep.final_train_loss.sqrt();
    println!(
        "train RMSE {:.4} target std after {} epochs ({:.1} s); initial {:.3}",
        rmse,
        rep.train_loss.len(),
        rep.wall_time_s,
        rep.initial_train_loss.sqrt()
    );
    Ok(())
}
