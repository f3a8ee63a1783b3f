#![allow(dead_code)]

use ndarray::{s, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soft_eit::dataset::{split_and_normalize, Aligned, SequenceDataset, SplitMode};
use soft_eit::eit::ConductanceChain;
use soft_eit::estimator::{lstm_backward, lstm_forward_batch, mse_loss, LstmParams, Mode, TENSOR_NAMES};

fn loss(params: &LstmParams, x: &Array3<f64>, y: &Array3<f64>, mode: Mode) -> f64 {
    let (pred, _) = lstm_forward_batch(params, x.view(), mode).unwrap();
    mse_loss(pred.view(), y.view(), 0).unwrap().0
}

/// Largest relative error between BPTT and central differences, per tensor.
///
/// The relative error of one entry is `|a - n| / max(|a|, |n|, floor)`; the
/// floor keeps entries whose true gradient is ~0 from dividing round-off by
/// round-off.
pub fn gradient_check(
    params: &LstmParams,
    x: &Array3<f64>,
    y: &Array3<f64>,
    mode: Mode,
    step: f64,
    floor: f64,
) -> Vec<(&'static str, f64)> {
    let (pred, cache) = lstm_forward_batch(params, x.view(), mode).unwrap();
    let (_, d_out) = mse_loss(pred.view(), y.view(), 0).unwrap();
    let analytic = lstm_backward(params, &cache, d_out.view()).unwrap();
    let mut out = Vec::new();
    for (k, name) in TENSOR_NAMES.iter().enumerate() {
        let n = analytic.slices()[k].len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut p = params.clone();
            p.weights.slices_mut()[k][i] += step;
            let up = loss(&p, x, y, mode);
            p.weights.slices_mut()[k][i] -= 2.0 * step;
            let down = loss(&p, x, y, mode);
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.slices()[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
        out.push((*name, worst));
    }
    out
}

pub fn random_inputs(t: usize, b: usize, f: usize, d: usize, seed: u64) -> (Array3<f64>, Array3<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array3::from_shape_fn((t, b, f), |_| rng.random_range(-1.0..1.0));
    let y = Array3::from_shape_fn((t, b, d), |_| rng.random_range(-1.0..1.0));
    (x, y)
}

/// Chain with 4..=20 electrodes and log-uniform conductances.
pub fn random_chain(rng: &mut ChaCha8Rng) -> ConductanceChain {
    let n = rng.random_range(4..=20);
    ConductanceChain {
        segment_conductances: (0..n - 1).map(|_| 10f64.powf(rng.random_range(-4.0..0.0))).collect(),
    }
}

pub fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let a = rng.random_range(1..=n);
    let mut b = rng.random_range(1..=n);
    while b == a {
        b = rng.random_range(1..=n);
    }
    (a, b)
}

/// In a series chain only the drive current flows, so the transfer
/// impedance is the signed resistance of the overlap of the two spans.
pub fn series_oracle(chain: &ConductanceChain, inject: (usize, usize), measure: (usize, usize)) -> f64 {
    let dir = if inject.0 < inject.1 { 1.0 } else { -1.0 };
    let sign = if measure.0 < measure.1 { 1.0 } else { -1.0 };
    let lo = inject.0.min(inject.1).max(measure.0.min(measure.1));
    let hi = inject.0.max(inject.1).min(measure.0.max(measure.1));
    let r: f64 = (lo..hi.max(lo)).map(|e| 1.0 / chain.segment_conductances[e - 1]).sum();
    dir * sign * r
}

pub fn total_resistance(chain: &ConductanceChain) -> f64 {
    chain.segment_conductances.iter().map(|g| 1.0 / g).sum()
}

/// Smooth three-channel input whose second channel is also the target.
pub fn identity_dataset(t: usize) -> SequenceDataset {
    let x = Array2::from_shape_fn((t, 3), |(i, j)| {
        let u = i as f64 * 0.05;
        [(0.7 * u).sin(), (1.3 * u).cos() + 0.3 * (0.2 * u).sin(), (0.31 * u).sin() * (0.9 * u).cos()][j]
    });
    let y = x.slice(s![.., 1..2]).to_owned();
    let features = Aligned {
        values: x,
        names: vec!["a".into(), "b".into(), "c".into()],
        rate_hz: 20.0,
        t0_s: 0.0,
    };
    let targets = Aligned {
        values: y,
        names: vec!["b_copy".into()],
        rate_hz: 20.0,
        t0_s: 0.0,
    };
    split_and_normalize(&features, &targets, 0.2, &SplitMode::ChronologicalTail).unwrap()
}
