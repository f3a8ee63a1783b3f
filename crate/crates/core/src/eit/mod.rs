//! Forward model for the electrode strip inside the saline chamber.
//!
//! The saline column between neighbouring electrodes is lumped into one
//! conductance, giving a 1-D resistor chain. Pressure inflates the channel
//! (more saline, higher conductance everywhere) and bending redistributes
//! the cross-section along the strip through a fixed, asymmetric weight
//! profile, so curvature is visible separately from pressure.

pub mod network;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::actuator::{ActuatorConfig, ActuatorState};
use crate::error::{Error, Result};
use crate::protocol::{Channel, Protocol};

pub use network::{NodalSolution, NodalSolver, ResistorNetwork};

/// Drive current of the impedance analyser.
pub const INJECTION_CURRENT_A: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElectrodeArray {
    pub n_electrodes: usize,
    pub pitch_mm: f64,
}

impl Default for ElectrodeArray {
    fn default() -> Self {
        Self {
            n_electrodes: 13,
            pitch_mm: 6.5,
        }
    }
}

impl ElectrodeArray {
    pub fn span_mm(&self) -> f64 {
        self.pitch_mm * (self.n_electrodes.saturating_sub(1)) as f64
    }

    pub fn validate(&self, actuator_length_mm: f64) -> Result<()> {
        if self.n_electrodes < 4 {
            return Err(Error::Electrode("need at least 4 electrodes".into()));
        }
        if !(self.pitch_mm > 0.0) {
            return Err(Error::Electrode("pitch must be positive".into()));
        }
        if self.span_mm() > actuator_length_mm {
            return Err(Error::Electrode(format!(
                "array span {} mm exceeds actuator length {actuator_length_mm} mm",
                self.span_mm()
            )));
        }
        Ok(())
    }
}

/// Parameters of the state-to-conductance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainModel {
    /// Segment conductance at rest.
    pub g0_s: f64,
    /// Relative conductance gain per unit of normalised pressure.
    pub alpha: f64,
    /// Relative conductance gain per unit of normalised curvature, scaled by
    /// the segment weight.
    pub beta: f64,
    /// Per-segment weights; `None` selects the default ramp.
    pub weights: Option<Vec<f64>>,
}

impl Default for ChainModel {
    fn default() -> Self {
        Self {
            g0_s: 0.01,
            alpha: 0.3,
            beta: 0.5,
            weights: None,
        }
    }
}

impl ChainModel {
    /// Linear ramp from the proximal to the distal segment, `(i + 1) / n`.
    pub fn default_weights(n_segments: usize) -> Vec<f64> {
        (0..n_segments)
            .map(|i| (i + 1) as f64 / n_segments as f64)
            .collect()
    }

    fn weights_for(&self, n_segments: usize) -> Result<Vec<f64>> {
        match &self.weights {
            Some(w) if w.len() == n_segments => Ok(w.clone()),
            Some(w) => Err(Error::Model(format!(
                "{} segment weights for {n_segments} segments",
                w.len()
            ))),
            None => Ok(Self::default_weights(n_segments)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceChain {
    pub segment_conductances: Vec<f64>,
}

impl ConductanceChain {
    pub fn uniform(n_electrodes: usize, g: f64) -> Self {
        Self {
            segment_conductances: vec![g; n_electrodes - 1],
        }
    }

    pub fn n_electrodes(&self) -> usize {
        self.segment_conductances.len() + 1
    }

    pub fn network(&self) -> Result<ResistorNetwork> {
        let edges = self
            .segment_conductances
            .iter()
            .enumerate()
            .map(|(i, &g)| (i, i + 1, g))
            .collect();
        ResistorNetwork::new(self.n_electrodes(), edges)
    }

    pub fn solver(&self) -> Result<ChainSolver> {
        let network = self.network()?;
        Ok(ChainSolver {
            n_electrodes: self.n_electrodes(),
            solver: network.factor()?,
            network,
        })
    }
}

/// Curvature at the midpoint of each inter-electrode segment.
///
/// Free bending is uniform. A tip reaction force adds a bending moment that
/// grows linearly towards the base, so in contact the profile is
/// `kappa_c + overshoot / L * (2 s / L - 1)`: its mean stays at the clamped
/// curvature and its slope is proportional to the force.
pub fn segment_curvatures(state: &ActuatorState, cfg: &ActuatorConfig, array: &ElectrodeArray) -> Vec<f64> {
    let n_seg = array.n_electrodes - 1;
    let l = cfg.length_mm;
    let overshoot = state.contact_force_mn / cfg.contact_stiffness_mn_per_rad;
    let offset = 0.5 * (l - array.span_mm());
    (0..n_seg)
        .map(|i| {
            let s = offset + (i as f64 + 0.5) * array.pitch_mm;
            state.curvature_per_mm + overshoot / l * (2.0 * s / l - 1.0)
        })
        .collect()
}

pub fn build_chain(
    state: &ActuatorState,
    cfg: &ActuatorConfig,
    array: &ElectrodeArray,
    model: &ChainModel,
) -> Result<ConductanceChain> {
    let n_seg = array.n_electrodes - 1;
    let weights = model.weights_for(n_seg)?;
    let dp = (state.pressure_bar - cfg.p_min_bar) / (cfg.pressure_at_full_bend() - cfg.p_min_bar);
    let profile = segment_curvatures(state, cfg, array);
    let segment_conductances = weights
        .iter()
        .zip(&profile)
        .enumerate()
        .map(|(i, (w, k))| {
            let dk = k / cfg.curvature_at_full_bend();
            let g = model.g0_s * (1.0 + model.alpha * dp + model.beta * dk * w);
            if g > 0.0 && g.is_finite() {
                Ok(g)
            } else {
                Err(Error::Model(format!("segment {i} conductance {g}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConductanceChain {
        segment_conductances,
    })
}

/// A factored chain, reusable across all channels of one frame.
#[derive(Debug, Clone)]
pub struct ChainSolver {
    n_electrodes: usize,
    solver: NodalSolver,
    network: ResistorNetwork,
}

impl ChainSolver {
    fn node(&self, electrode: usize) -> Result<usize> {
        if electrode == 0 || electrode > self.n_electrodes {
            return Err(Error::Electrode(format!(
                "electrode {electrode} outside 1..={}",
                self.n_electrodes
            )));
        }
        Ok(electrode - 1)
    }

    /// Full nodal solution for the drive current entering at `inject.0` and
    /// leaving at `inject.1`.
    pub fn drive(&self, inject: (usize, usize)) -> Result<NodalSolution> {
        let (a, b) = (self.node(inject.0)?, self.node(inject.1)?);
        self.solver.solve(a, b, INJECTION_CURRENT_A)
    }

    /// `(V_c - V_d) / I` for the given injection and measurement pairs.
    ///
    /// Solved with `d` grounded, so the result is a single potential rather
    /// than a difference of two large ones.
    pub fn transfer_impedance(&self, inject: (usize, usize), measure: (usize, usize)) -> Result<f64> {
        if measure.0 == measure.1 {
            return Err(Error::Electrode("measurement pair coincides".into()));
        }
        let (c, d) = (self.node(measure.0)?, self.node(measure.1)?);
        let (a, b) = (self.node(inject.0)?, self.node(inject.1)?);
        let sol = self.network.factor_grounded(d)?.solve(a, b, INJECTION_CURRENT_A)?;
        Ok(sol.potentials[c] / INJECTION_CURRENT_A)
    }
}

pub fn transfer_impedance(
    chain: &ConductanceChain,
    inject: (usize, usize),
    measure: (usize, usize),
) -> Result<f64> {
    chain.solver()?.transfer_impedance(inject, measure)
}

/// Extra measurement noise near the rest shape, where impedance changes are
/// small relative to the noise floor: `1 + peak_gain * exp(-(theta / width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrGain {
    pub peak_gain: f64,
    pub width_rad: f64,
}

impl Default for SnrGain {
    fn default() -> Self {
        Self {
            peak_gain: 3.0,
            width_rad: 0.5,
        }
    }
}

impl SnrGain {
    pub fn gain(&self, bending_angle_rad: f64) -> f64 {
        1.0 + self.peak_gain * (-(bending_angle_rad / self.width_rad).powi(2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma_ohm: f64,
    pub snr_gain: Option<SnrGain>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_ohm: 0.5,
            snr_gain: None,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_ohm: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ohm >= 0.0 && self.sigma_ohm.is_finite()) {
            return Err(Error::Config(format!("sigma_ohm {}", self.sigma_ohm)));
        }
        if let Some(g) = self.snr_gain {
            if !(g.peak_gain >= 0.0 && g.width_rad > 0.0) {
                return Err(Error::Config("invalid SNR gain".into()));
            }
        }
        Ok(())
    }

    pub fn effective_sigma(&self, bending_angle_rad: f64) -> f64 {
        self.sigma_ohm * self.snr_gain.map_or(1.0, |g| g.gain(bending_angle_rad))
    }
}

/// One seeded noise stream. Draws are consumed in call order, so a session
/// replays identically for the same seed and sequence of calls.
#[derive(Debug, Clone)]
pub struct NoiseSession {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoiseSession {
    pub fn new(model: NoiseModel) -> Result<Self> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self { model, rng })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn apply_noise(&mut self, z: f64, bending_angle_rad: f64) -> f64 {
        let sigma = self.model.effective_sigma(bending_angle_rad);
        if sigma == 0.0 {
            return z;
        }
        let n: f64 = StandardNormal.sample(&mut self.rng);
        z + sigma * n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EitFrame {
    pub t_s: f64,
    pub z_ohm: Vec<f64>,
}

/// Simulated impedance analyser running one protocol in TDM order.
#[derive(Debug, Clone)]
pub struct EitSensor {
    pub actuator: ActuatorConfig,
    pub array: ElectrodeArray,
    pub chain_model: ChainModel,
    pub protocol: Protocol,
    noise: NoiseSession,
}

impl EitSensor {
    pub fn new(
        actuator: ActuatorConfig,
        array: ElectrodeArray,
        chain_model: ChainModel,
        protocol: Protocol,
        noise: NoiseModel,
    ) -> Result<Self> {
        array.validate(actuator.length_mm)?;
        if let Err(v) = protocol.validate(&array) {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(Error::Protocol(msgs.join("; ")));
        }
        Ok(Self {
            actuator,
            array,
            chain_model,
            protocol,
            noise: NoiseSession::new(noise)?,
        })
    }

    /// Noise-free impedances of every channel for a frozen state.
    pub fn clean_frame(&self, state: &ActuatorState) -> Result<Vec<f64>> {
        let chain = build_chain(state, &self.actuator, &self.array, &self.chain_model)?;
        let solver = chain.solver()?;
        let mut cached: Option<((usize, usize), NodalSolution)> = None;
        self.protocol
            .channels
            .iter()
            .map(|ch: &Channel| {
                if cached.as_ref().map(|(p, _)| *p) != Some(ch.inject) {
                    cached = Some((ch.inject, solver.drive(ch.inject)?));
                }
                let sol = &cached.as_ref().expect("just filled").1;
                let (c, d) = (ch.measure.0 - 1, ch.measure.1 - 1);
                Ok((sol.potentials[c] - sol.potentials[d]) / INJECTION_CURRENT_A)
            })
            .collect()
    }

    pub fn measure_frame(&mut self, state: &ActuatorState) -> Result<EitFrame> {
        let angle = state.bending_angle(&self.actuator);
        let z_ohm = self
            .clean_frame(state)?
            .into_iter()
            .map(|z| self.noise.apply_noise(z, angle))
            .collect();
        Ok(EitFrame {
            t_s: state.t_s,
            z_ohm,
        })
    }

    pub fn measure_all(&mut self, states: &[ActuatorState]) -> Result<Vec<EitFrame>> {
        states.iter().map(|s| self.measure_frame(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::{simulate_trajectory, ActuationSignal};
    use crate::protocol::default_protocol_13;
    use proptest::prelude::*;
    use rand::Rng;

    /// Closed form for a series chain: the signed sum of segment resistances
    /// between the measurement electrodes that carry the drive current.
    fn series_oracle(chain: &ConductanceChain, inject: (usize, usize), measure: (usize, usize)) -> f64 {
        let (a, b) = (inject.0.min(inject.1), inject.0.max(inject.1));
        let dir = if inject.0 < inject.1 { 1.0 } else { -1.0 };
        let (c, d) = (measure.0.min(measure.1), measure.0.max(measure.1));
        let sign = if measure.0 < measure.1 { 1.0 } else { -1.0 };
        let lo = a.max(c);
        let hi = b.min(d);
        let r: f64 = (lo..hi.max(lo))
            .map(|e| 1.0 / chain.segment_conductances[e - 1])
            .sum();
        dir * sign * r
    }

    fn rest_state(cfg: &ActuatorConfig) -> ActuatorState {
        ActuatorState {
            t_s: 0.0,
            steps: 0.0,
            pressure_bar: cfg.p_min_bar,
            curvature_per_mm: 0.0,
            tip_y_mm: 0.0,
            tip_z_mm: cfg.length_mm,
            contact_force_mn: 0.0,
        }
    }

    #[test]
    fn contact_profile_keeps_mean_and_scales_with_force() {
        let cfg = ActuatorConfig::default();
        let array = ElectrodeArray::default();
        let mut s = rest_state(&cfg);
        s.curvature_per_mm = 0.3 * cfg.curvature_at_full_bend();
        let free = segment_curvatures(&s, &cfg, &array);
        assert!(free.iter().all(|&k| k == s.curvature_per_mm));

        s.contact_force_mn = 40.0;
        let a = segment_curvatures(&s, &cfg, &array);
        s.contact_force_mn = 80.0;
        let b = segment_curvatures(&s, &cfg, &array);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - s.curvature_per_mm).abs() < 1e-15);
        assert!(a.windows(2).all(|w| w[1] > w[0]), "distal segments bend more");
        for ((ka, kb), k0) in a.iter().zip(&b).zip(&free) {
            assert!(((kb - k0) - 2.0 * (ka - k0)).abs() < 1e-15);
        }
        // slope from the beam relation: overshoot / L * 2 / L per mm of arc
        let slope = (a[1] - a[0]) / array.pitch_mm;
        let overshoot = 40.0 / cfg.contact_stiffness_mn_per_rad;
        assert!((slope - 2.0 * overshoot / cfg.length_mm.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rest_chain_is_uniform() {
        let cfg = ActuatorConfig::default();
        let chain = build_chain(&rest_state(&cfg), &cfg, &ElectrodeArray::default(), &ChainModel::default()).unwrap();
        assert_eq!(chain.segment_conductances, vec![0.01; 12]);
    }

    #[test]
    fn curvature_changes_chain() {
        let cfg = ActuatorConfig::default();
        let mut s = rest_state(&cfg);
        let array = ElectrodeArray::default();
        let m = ChainModel::default();
        s.curvature_per_mm = 0.005;
        let a = build_chain(&s, &cfg, &array, &m).unwrap();
        assert_eq!(a, build_chain(&s, &cfg, &array, &m).unwrap());
        s.curvature_per_mm = 0.01;
        let b = build_chain(&s, &cfg, &array, &m).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn non_physical_parameters_fail() {
        let cfg = ActuatorConfig::default();
        let mut s = rest_state(&cfg);
        s.curvature_per_mm = cfg.curvature_at_full_bend();
        let m = ChainModel { beta: -5.0, ..ChainModel::default() };
        assert!(matches!(
            build_chain(&s, &cfg, &ElectrodeArray::default(), &m),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn uniform_chain_examples() {
        let chain = ConductanceChain::uniform(13, 0.01);
        let z = transfer_impedance(&chain, (1, 7), (3, 5)).unwrap();
        assert!((z - 200.0).abs() < 1e-9);
        let outside = transfer_impedance(&chain, (1, 7), (9, 11)).unwrap();
        assert!(outside.abs() < 1e-9);
        let a = transfer_impedance(&chain, (1, 7), (2, 6)).unwrap();
        let b = transfer_impedance(&chain, (2, 6), (1, 7)).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn invalid_electrodes_error() {
        let chain = ConductanceChain::uniform(13, 0.01);
        assert!(transfer_impedance(&chain, (0, 7), (3, 5)).is_err());
        assert!(transfer_impedance(&chain, (1, 14), (3, 5)).is_err());
        assert!(transfer_impedance(&chain, (1, 1), (3, 5)).is_err());
        assert!(transfer_impedance(&chain, (1, 7), (3, 3)).is_err());
    }

    fn random_chain(seed: u64) -> ConductanceChain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=16);
        ConductanceChain {
            segment_conductances: (1..n).map(|_| rng.random_range(1e-3..1e-1)).collect(),
        }
    }

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
        let a = rng.random_range(1..=n);
        let mut b = rng.random_range(1..=n);
        while b == a {
            b = rng.random_range(1..=n);
        }
        (a, b)
    }

    proptest! {
        #[test]
        fn solver_matches_series_oracle(seed in any::<u64>()) {
            let chain = random_chain(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let n = chain.n_electrodes();
            let (inj, mea) = (random_pair(&mut rng, n), random_pair(&mut rng, n));
            let z = transfer_impedance(&chain, inj, mea).unwrap();
            let oracle = series_oracle(&chain, inj, mea);
            prop_assert!((z - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
            let swapped = transfer_impedance(&chain, mea, inj).unwrap();
            prop_assert!((z - swapped).abs() <= 1e-12 * z.abs().max(1.0));
        }

        #[test]
        fn scaling_conductances_scales_impedance(seed in any::<u64>(), s in 0.1f64..10.0) {
            let chain = random_chain(seed);
            let scaled = ConductanceChain {
                segment_conductances: chain.segment_conductances.iter().map(|g| g * s).collect(),
            };
            let n = chain.n_electrodes();
            let z = transfer_impedance(&chain, (1, n), (2, n - 1)).unwrap();
            let zs = transfer_impedance(&scaled, (1, n), (2, n - 1)).unwrap();
            prop_assert!((zs - z / s).abs() <= 1e-12 * (z / s).abs());
        }
    }

    #[test]
    fn charge_is_conserved() {
        for seed in 0..50 {
            let chain = random_chain(seed);
            let net = chain.network().unwrap();
            let n = chain.n_electrodes();
            let sol = chain.solver().unwrap().drive((1, n)).unwrap();
            let currents = sol.nodal_currents(&net);
            assert!(currents.iter().sum::<f64>().abs() < 1e-12 * INJECTION_CURRENT_A);
            for (c, i) in currents.iter().zip(&sol.injected) {
                assert!((c - i).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_behaviour() {
        let mut quiet = NoiseSession::new(NoiseModel::noiseless()).unwrap();
        assert_eq!(quiet.apply_noise(123.0, 0.0), 123.0);

        let model = NoiseModel { sigma_ohm: 1.0, snr_gain: None, seed: 11 };
        let mut a = NoiseSession::new(model.clone()).unwrap();
        let mut b = NoiseSession::new(model).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| a.apply_noise(0.0, 0.0)).collect();
        let ys: Vec<f64> = (0..100_000).map(|_| b.apply_noise(0.0, 0.0)).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.99..=1.01).contains(&sd), "sample std {sd}");
    }

    #[test]
    fn snr_gain_peaks_at_rest() {
        let g = SnrGain::default();
        assert!((g.gain(0.0) - 4.0).abs() < 1e-12);
        assert!(g.gain(0.3) > g.gain(1.0));
        assert!(g.gain(2.0) < 1.01);
    }

    #[test]
    fn frames_follow_protocol() {
        let cfg = ActuatorConfig::default();
        let protocol = default_protocol_13();
        let mut sensor = EitSensor::new(
            cfg.clone(),
            ElectrodeArray::default(),
            ChainModel::default(),
            protocol.clone(),
            NoiseModel::noiseless(),
        )
        .unwrap();
        let rest = rest_state(&cfg);
        let f1 = sensor.measure_frame(&rest).unwrap();
        let f2 = sensor.measure_frame(&rest).unwrap();
        assert_eq!(f1.z_ohm.len(), 9);
        assert_eq!(f1, f2);

        let mut sub = EitSensor::new(
            cfg.clone(),
            ElectrodeArray::default(),
            ChainModel::default(),
            protocol.subset(4).unwrap(),
            NoiseModel::noiseless(),
        )
        .unwrap();
        let states = simulate_trajectory(&ActuationSignal::constant_peaks(12.0), &cfg, None, 20.0).unwrap();
        for s in &states {
            let full = sensor.measure_frame(s).unwrap();
            let part = sub.measure_frame(s).unwrap();
            assert_eq!(&full.z_ohm[..4], &part.z_ohm[..]);
        }
    }

    #[test]
    fn curvature_is_observable() {
        let cfg = ActuatorConfig::default();
        let sensor = EitSensor::new(
            cfg.clone(),
            ElectrodeArray::default(),
            ChainModel::default(),
            default_protocol_13(),
            NoiseModel::noiseless(),
        )
        .unwrap();
        let mut s = rest_state(&cfg);
        let mut prev = sensor.clean_frame(&s).unwrap();
        for k in 1..=20 {
            s.curvature_per_mm = cfg.curvature_at_full_bend() * k as f64 / 20.0;
            let next = sensor.clean_frame(&s).unwrap();
            assert!(prev.iter().zip(&next).any(|(a, b)| (a - b).abs() > 0.0));
            prev = next;
        }
    }

    #[test]
    fn array_validation() {
        assert!(ElectrodeArray::default().validate(100.0).is_ok());
        assert!(ElectrodeArray { n_electrodes: 3, pitch_mm: 6.5 }.validate(100.0).is_err());
        assert!(ElectrodeArray { n_electrodes: 13, pitch_mm: 10.0 }.validate(100.0).is_err());
    }
}
