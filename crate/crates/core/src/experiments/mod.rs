//! End-to-end reproduction runs: simulate, measure, assemble, train, score.

pub mod check;
pub mod metrics;
pub mod report;

use std::fmt;

use ndarray::{Array2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actuator::{
    simulate_trajectory, ActuationSignal, ActuatorConfig, ActuatorState, ContactLocation, ContactScenario,
};
use crate::dataset::{align, resample, split_and_normalize, SequenceDataset, Split, SplitMode, TimeSeries};
use crate::eit::{ChainModel, ElectrodeArray, EitSensor, NoiseModel, SnrGain};
use crate::error::{Error, Result};
use crate::estimator::{predict, train, TrainConfig};
use crate::protocol::default_protocol_13;

pub use check::{check_e1, check_e2, check_e4_channels, check_e4_snr, check_loss_decreased, Check};
pub use metrics::{column_ranges, mean_std, mean_std_abs_error, percent_of_range, rmse, rmse_plane};
pub use report::{ExperimentReport, MeanStd, MetricsReport, RunArtifacts, RunFailure, SeedMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "E1_ConstAmp")]
    E1ConstAmp,
    #[serde(rename = "E2_RandAmp")]
    E2RandAmp,
    #[serde(rename = "E3_TipChannels")]
    E3TipChannels,
    #[serde(rename = "E4_ForceAngles")]
    E4ForceAngles,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [Self::E1ConstAmp, Self::E2RandAmp, Self::E3TipChannels, Self::E4ForceAngles];

    pub fn short(self) -> &'static str {
        match self {
            Self::E1ConstAmp => "e1",
            Self::E2RandAmp => "e2",
            Self::E3TipChannels => "e3",
            Self::E4ForceAngles => "e4",
        }
    }

    pub fn from_short(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }

    pub fn is_force(self) -> bool {
        self == Self::E4ForceAngles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    PressureOnly,
    #[serde(rename = "PressureAndEIT")]
    PressureAndEit,
}

impl FeatureMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pressure" => Ok(Self::PressureOnly),
            "pressure+eit" => Ok(Self::PressureAndEit),
            _ => Err(Error::Config(format!("feature mode '{s}', expected pressure or pressure+eit"))),
        }
    }
}

/// Training epochs used by the presets.
pub const REPRODUCTION_EPOCHS: usize = 60;

/// One experiment: a feature mode swept over channel counts and, for the
/// force experiment, over contact locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub feature_mode: FeatureMode,
    /// Ignored for `PressureOnly`.
    pub channel_counts: Vec<usize>,
    /// Contact locations; only used by the force experiment.
    pub scenarios: Vec<ContactLocation>,
    pub duration_s: f64,
    pub seeds: Vec<u64>,
    pub sample_rate_hz: f64,
    pub tip_truth_rate_hz: f64,
    pub force_truth_rate_hz: f64,
    pub test_ratio: f64,
    /// Contact runs start with the tip touching the sensor: the pump rests at
    /// the position whose nominal free bend equals the contact angle.
    #[serde(default)]
    pub precurve_contact: bool,
    pub actuator: ActuatorConfig,
    pub signal: ActuationSignal,
    pub array: ElectrodeArray,
    pub chain_model: ChainModel,
    pub noise: NoiseModel,
    pub train: TrainConfig,
}

impl ExperimentSpec {
    /// Reproduction defaults for one experiment, seeds `0..5`.
    pub fn preset(id: ExperimentId, feature_mode: FeatureMode) -> Self {
        let (duration_s, signal, channel_counts, scenarios, noise) = match id {
            ExperimentId::E1ConstAmp => (600.0, ActuationSignal::constant_peaks(600.0), vec![4], vec![], NoiseModel::default()),
            ExperimentId::E2RandAmp => (1200.0, ActuationSignal::random_peaks(1200.0, 0), vec![4], vec![], NoiseModel::default()),
            ExperimentId::E3TipChannels => {
                (1200.0, ActuationSignal::random_peaks(1200.0, 0), vec![1, 4, 8], vec![], NoiseModel::default())
            }
            ExperimentId::E4ForceAngles => (
                600.0,
                ActuationSignal::random_peaks(600.0, 0),
                vec![1, 4, 8],
                ContactLocation::ALL.to_vec(),
                NoiseModel {
                    snr_gain: Some(SnrGain::default()),
                    ..NoiseModel::default()
                },
            ),
        };
        Self {
            id,
            feature_mode,
            channel_counts,
            scenarios,
            duration_s,
            seeds: (0..5).collect(),
            sample_rate_hz: 20.0,
            tip_truth_rate_hz: 125.0,
            force_truth_rate_hz: 62.5,
            test_ratio: 0.2,
            precurve_contact: id.is_force(),
            actuator: ActuatorConfig::default(),
            signal,
            array: ElectrodeArray::default(),
            chain_model: ChainModel::default(),
            noise,
            train: TrainConfig {
                epochs: REPRODUCTION_EPOCHS,
                ..TrainConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_channels = default_protocol_13().len();
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.feature_mode == FeatureMode::PressureAndEit {
            if self.channel_counts.is_empty() {
                return Err(Error::Config("no channel counts".into()));
            }
            if let Some(&k) = self.channel_counts.iter().find(|&&k| k == 0 || k > n_channels) {
                return Err(Error::Config(format!("channel count {k} outside 1..={n_channels}")));
            }
        }
        if self.id.is_force() && self.scenarios.is_empty() {
            return Err(Error::Config("force experiment needs at least one contact location".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Config(format!("duration {}", self.duration_s)));
        }
        for r in [self.sample_rate_hz, self.tip_truth_rate_hz, self.force_truth_rate_hz] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("sample rate {r}")));
            }
        }
        self.actuator.validate()?;
        self.signal.validate()?;
        self.array.validate(self.actuator.length_mm)?;
        self.noise.validate()?;
        self.train.validate()
    }

    pub fn variants(&self) -> Vec<Variant> {
        let scenarios: Vec<Option<ContactLocation>> = if self.id.is_force() {
            self.scenarios.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let counts = match self.feature_mode {
            FeatureMode::PressureOnly => vec![0],
            FeatureMode::PressureAndEit => self.channel_counts.clone(),
        };
        scenarios
            .into_iter()
            .flat_map(|s| counts.iter().map(move |&c| Variant { scenario: s, channels: c }))
            .collect()
    }
}

/// One cell of the sweep. `channels == 0` means pressure only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub scenario: Option<ContactLocation>,
    pub channels: usize,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.scenario {
            write!(f, "loc{}_", s.letter().to_ascii_uppercase())?;
        }
        match self.channels {
            0 => write!(f, "pressure"),
            k => write!(f, "eit{k}"),
        }
    }
}

/// Independent seed for a named stream of one run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_TRAIN: u64 = 3;

/// Simulated recordings of one seed, before feature selection.
#[derive(Debug, Clone)]
pub struct Recording {
    /// Ground truth at its native rate.
    pub truth: TimeSeries,
    /// Pump-side pressure at the EIT frame rate.
    pub pressure: TimeSeries,
    /// All protocol channels at the EIT frame rate.
    pub impedance: TimeSeries,
}

fn state_column(states: &[ActuatorState], f: impl Fn(&ActuatorState) -> f64) -> Vec<f64> {
    states.iter().map(f).collect()
}

/// Simulates one seed: ground truth, pressure and every protocol channel.
pub fn record(spec: &ExperimentSpec, scenario: Option<ContactLocation>, seed: u64) -> Result<Recording> {
    let scenario_index = scenario.map_or(0, |s| s as u64 + 1);
    let mut signal = spec.signal.clone();
    signal.duration_s = spec.duration_s;
    signal.seed = derive_seed(seed, STREAM_SIGNAL + 16 * scenario_index);
    let contact = scenario.map(|s| ContactScenario::at(s, &spec.actuator));
    let cfg = &spec.actuator;
    if let (true, Some(c)) = (spec.precurve_contact, &contact) {
        signal.rest_steps = c.contact_steps(cfg);
    }

    let truth = if spec.id.is_force() {
        let states = simulate_trajectory(&signal, cfg, contact.as_ref(), spec.force_truth_rate_hz)?;
        TimeSeries::from_column(spec.force_truth_rate_hz, 0.0, "force_mN", state_column(&states, |s| s.contact_force_mn))?
    } else {
        let states = simulate_trajectory(&signal, cfg, contact.as_ref(), spec.tip_truth_rate_hz)?;
        let values = Array2::from_shape_fn((states.len(), 2), |(i, j)| {
            if j == 0 { states[i].tip_y_mm } else { states[i].tip_z_mm }
        });
        TimeSeries::new(spec.tip_truth_rate_hz, 0.0, values, vec!["tip_y_mm".into(), "tip_z_mm".into()])?
    };

    let states = simulate_trajectory(&signal, cfg, contact.as_ref(), spec.sample_rate_hz)?;
    let pressure =
        TimeSeries::from_column(spec.sample_rate_hz, 0.0, "pressure_bar", state_column(&states, |s| s.pressure_bar))?;
    let protocol = default_protocol_13();
    let n = protocol.len();
    let noise = NoiseModel {
        seed: derive_seed(seed, STREAM_NOISE + 16 * scenario_index),
        ..spec.noise.clone()
    };
    let mut sensor = EitSensor::new(cfg.clone(), spec.array, spec.chain_model.clone(), protocol, noise)?;
    let frames = sensor.measure_all(&states)?;
    let mut z = Array2::zeros((frames.len(), n));
    for (mut row, f) in z.outer_iter_mut().zip(&frames) {
        row.assign(&ndarray::ArrayView1::from(&f.z_ohm[..]));
    }
    let impedance = TimeSeries::new(spec.sample_rate_hz, 0.0, z, (1..=n).map(|k| format!("z{k}")).collect())?;
    Ok(Recording {
        truth,
        pressure,
        impedance,
    })
}

/// Aligned, normalised dataset for `channels` leading protocol channels.
pub fn assemble(spec: &ExperimentSpec, rec: &Recording, channels: usize) -> Result<SequenceDataset> {
    let mut inputs = vec![rec.pressure.clone()];
    if channels > 0 {
        let k = channels.min(rec.impedance.values.ncols());
        let cols: Vec<usize> = (0..k).collect();
        inputs.push(TimeSeries::new(
            rec.impedance.rate_hz,
            rec.impedance.t0_s,
            rec.impedance.values.select(Axis(1), &cols),
            rec.impedance.dim_names[..k].to_vec(),
        )?);
    }
    let truth = resample(&rec.truth, spec.sample_rate_hz)?;
    let features = align(&inputs)?;
    let targets = align(&[truth])?;
    split_and_normalize(&features, &targets, spec.test_ratio, &SplitMode::ChronologicalTail)
}

/// Test-split metrics in physical units. Tip errors are quoted against the
/// range as RMSE, force errors as mean absolute error.
pub fn test_metrics(pred: &Array2<f64>, truth: &Array2<f64>, force: bool) -> Result<SeedMetrics> {
    let rmse_per_axis = rmse(pred, truth)?;
    let rmse_plane = if truth.ncols() == 2 { Some(rmse_plane(pred, truth)?) } else { None };
    let (mean_abs_err, std_abs_err) = mean_std_abs_error(pred, truth)?;
    let ranges = column_ranges(truth);
    let percent = if force {
        ranges.iter().map(|&r| percent_of_range(mean_abs_err, r)).collect()
    } else {
        rmse_per_axis.iter().zip(&ranges).map(|(&m, &r)| percent_of_range(m, r)).collect()
    };
    let plane_range = rmse_plane.map(|_| ranges[0].hypot(ranges[1]));
    Ok(SeedMetrics {
        seed: 0,
        rmse_per_axis,
        rmse_plane,
        mean_abs_err,
        std_abs_err,
        ranges,
        plane_range,
        percent_of_range: percent,
        plane_percent_of_range: rmse_plane.zip(plane_range).and_then(|(m, r)| percent_of_range(m, r)),
        initial_train_loss: None,
        final_train_loss: None,
        final_val_loss: None,
    })
}

/// Training settings of `spec` with the seed derived for `seed`.
pub fn train_config(spec: &ExperimentSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(seed, STREAM_TRAIN),
        ..spec.train.clone()
    }
}

/// Trains on one dataset and scores the test split in physical units.
pub fn score(spec: &ExperimentSpec, ds: &SequenceDataset, seed: u64) -> Result<(SeedMetrics, RunArtifacts)> {
    let rep = train(ds, &train_config(spec, seed))?;
    if let Some(epoch) = rep.diverged_at {
        return Err(Error::Diverged { epoch });
    }
    let pred = predict(&rep.params, ds, Split::Test)?;
    let truth = SequenceDataset::select_rows(&ds.raw_targets(), &ds.test_rows);
    let metrics = SeedMetrics {
        seed,
        initial_train_loss: Some(rep.initial_train_loss),
        final_train_loss: Some(rep.final_train_loss),
        final_val_loss: rep.val_loss.last().copied(),
        ..test_metrics(&pred, &truth, spec.id.is_force())?
    };
    let artifacts = RunArtifacts {
        variant: String::new(),
        seed,
        time_s: ds.test_rows.iter().map(|&r| ds.time_s[r]).collect(),
        target_names: ds.target_names.clone(),
        truth,
        prediction: pred,
        train_loss: rep.train_loss,
        val_loss: rep.val_loss,
    };
    Ok((metrics, artifacts))
}

/// Runs every (variant, seed) cell. Failures are recorded and the remaining
/// cells still run; an invalid spec is the only hard error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let variants = spec.variants();
    let mut per_variant: Vec<Vec<SeedMetrics>> = vec![Vec::new(); variants.len()];
    let mut failures = Vec::new();
    let mut artifacts = Vec::new();
    let mut feature_names: Vec<Option<(Vec<String>, Vec<String>)>> = vec![None; variants.len()];

    let mut scenarios: Vec<Option<ContactLocation>> = variants.iter().map(|v| v.scenario).collect();
    scenarios.dedup();
    for &scenario in &scenarios {
        for &seed in &spec.seeds {
            let rec = match record(spec, scenario, seed) {
                Ok(r) => r,
                Err(e) => {
                    for v in variants.iter().filter(|v| v.scenario == scenario) {
                        failures.push(RunFailure::new(v, seed, "simulate", &e));
                    }
                    continue;
                }
            };
            for (vi, v) in variants.iter().enumerate().filter(|(_, v)| v.scenario == scenario) {
                let ds = match assemble(spec, &rec, v.channels) {
                    Ok(d) => d,
                    Err(e) => {
                        failures.push(RunFailure::new(v, seed, "dataset", &e));
                        continue;
                    }
                };
                match score(spec, &ds, seed) {
                    Ok((m, mut a)) => {
                        log::info!("{:?} {v} seed {seed}: mean |err| {:.4}", spec.id, m.mean_abs_err);
                        feature_names[vi].get_or_insert_with(|| (ds.feature_names.clone(), ds.target_names.clone()));
                        a.variant = v.to_string();
                        per_variant[vi].push(m);
                        artifacts.push(a);
                    }
                    Err(e) => failures.push(RunFailure::new(v, seed, "train", &e)),
                }
            }
        }
    }

    let variant_reports = variants
        .iter()
        .zip(per_variant)
        .zip(feature_names)
        .map(|((v, seeds), names)| {
            let (features, targets) = names.unwrap_or_default();
            MetricsReport::aggregate(*v, features, targets, seeds)
        })
        .collect();
    Ok(ExperimentReport {
        spec: spec.clone(),
        variants: variant_reports,
        failures,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(id: ExperimentId, mode: FeatureMode) -> ExperimentSpec {
        let mut s = ExperimentSpec::preset(id, mode);
        s.duration_s = 40.0;
        s.seeds = vec![3];
        s.train = TrainConfig {
            hidden_dim: 4,
            epochs: 2,
            seq_window_len: 40,
            window_stride: 40,
            ..TrainConfig::default()
        };
        s
    }

    #[test]
    fn variants_cover_sweep() {
        let e4 = ExperimentSpec::preset(ExperimentId::E4ForceAngles, FeatureMode::PressureAndEit);
        let v = e4.variants();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0].to_string(), "locA_eit1");
        let e2 = ExperimentSpec::preset(ExperimentId::E2RandAmp, FeatureMode::PressureOnly);
        assert_eq!(e2.variants(), vec![Variant { scenario: None, channels: 0 }]);
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::preset(ExperimentId::E3TipChannels, FeatureMode::PressureAndEit);
        assert!(s.validate().is_ok());
        s.channel_counts = vec![10];
        assert!(s.validate().is_err());
        s.channel_counts = vec![4];
        s.seeds.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn recording_shapes_and_resampled_truth() {
        let s = tiny(ExperimentId::E2RandAmp, FeatureMode::PressureAndEit);
        let rec = record(&s, None, 1).unwrap();
        assert_eq!(rec.truth.rate_hz, 125.0);
        assert_eq!(rec.impedance.values.ncols(), 9);
        assert_eq!(rec.pressure.len(), rec.impedance.len());
        let ds = assemble(&s, &rec, 4).unwrap();
        assert_eq!(ds.feature_names, vec!["pressure_bar", "z1", "z2", "z3", "z4"]);
        assert_eq!(ds.target_names, vec!["tip_y_mm", "tip_z_mm"]);
        assert_eq!(ds.test_rows.len(), (0.2 * ds.time_s.len() as f64).round() as usize);
    }

    #[test]
    fn channel_subsets_share_measurements() {
        let s = tiny(ExperimentId::E3TipChannels, FeatureMode::PressureAndEit);
        let rec = record(&s, None, 2).unwrap();
        let d1 = assemble(&s, &rec, 1).unwrap();
        let d8 = assemble(&s, &rec, 8).unwrap();
        assert_eq!(d1.raw_features().column(1), d8.raw_features().column(1));
    }

    #[test]
    fn force_recording_uses_force_rate() {
        let s = tiny(ExperimentId::E4ForceAngles, FeatureMode::PressureAndEit);
        let rec = record(&s, Some(ContactLocation::LocationA), 0).unwrap();
        assert_eq!(rec.truth.rate_hz, 62.5);
        assert_eq!(rec.truth.dim_names, vec!["force_mN"]);
        assert!(rec.truth.values.iter().any(|&f| f > 0.0));
    }

    #[test]
    fn run_is_deterministic_and_complete() {
        let s = tiny(ExperimentId::E1ConstAmp, FeatureMode::PressureAndEit);
        let a = run_experiment(&s).unwrap();
        let b = run_experiment(&s).unwrap();
        assert!(a.failures.is_empty());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let v = &a.variants[0];
        assert_eq!(v.per_seed.len(), 1);
        let m = &v.per_seed[0];
        let plane = m.rmse_plane.unwrap();
        assert!((plane.powi(2) - m.rmse_per_axis[0].powi(2) - m.rmse_per_axis[1].powi(2)).abs() < 1e-10);
        assert!(m.percent_of_range.iter().all(|p| p.is_some_and(|p| p >= 0.0)));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut s = tiny(ExperimentId::E1ConstAmp, FeatureMode::PressureOnly);
        // shorter than a single training window
        s.train.seq_window_len = 5000;
        s.train.window_stride = 5000;
        let r = run_experiment(&s).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].stage, "train");
        assert!(r.variants[0].per_seed.is_empty());
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(0, STREAM_SIGNAL), derive_seed(0, STREAM_NOISE));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
