//! Single-DOF constant-curvature model of the saline-driven bending actuator.
//!
//! The pump drives a syringe in stepper-motor steps. Steps map affinely to
//! chamber pressure, pressure maps affinely to curvature, and curvature maps to
//! the in-plane tip position through constant-curvature kinematics. Two effects
//! sit on top of the static chain:
//!
//! * stress softening: after a large actuation the elastomer is temporarily
//!   softer, so the actuator bends further at the same pressure until it
//!   recovers (see [`ActuatorConfig::softening_gain`]);
//! * contact: a rigid sensor plane stops the tip at a fixed bending angle and
//!   the excess bending is reported as force through a linear angular spring.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tip-workspace ranges (mm) implied by the reported RMSE percentages:
/// 3.6 mm is 7.36 % of the Y range and 4.6 mm is 6.07 % of the Z range.
pub const TARGET_Y_RANGE_MM: f64 = 3.6 / 0.0736;
pub const TARGET_Z_RANGE_MM: f64 = 4.6 / 0.0607;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorConfig {
    pub length_mm: f64,
    pub outer_diameter_mm: f64,
    pub wall_thickness_mm: f64,
    pub p_min_bar: f64,
    pub p_max_bar: f64,
    /// Pump position at which the chamber reaches `p_max_bar`.
    pub steps_at_pmax: f64,
    /// Pump position at which the free actuator bends to `theta_max_rad`.
    pub steps_at_theta_max: f64,
    pub theta_max_rad: f64,
    pub contact_stiffness_mn_per_rad: f64,
    /// Extra compliance per unit of unrecovered past actuation, in `[0, 1]`.
    /// Zero disables softening.
    pub softening_gain: f64,
    /// Time constant of recovery from softening.
    pub softening_recovery_s: f64,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        let theta_max = calibrate_theta_max(100.0, TARGET_Y_RANGE_MM, TARGET_Z_RANGE_MM);
        Self {
            length_mm: 100.0,
            outer_diameter_mm: 12.0,
            wall_thickness_mm: 4.0,
            p_min_bar: 1.131,
            p_max_bar: 1.675,
            steps_at_pmax: 4000.0,
            steps_at_theta_max: 5000.0,
            theta_max_rad: theta_max,
            // Peak force of 140 mN at the contact location nearest rest.
            contact_stiffness_mn_per_rad: 140.0 / ((1.0 - LOCATION_FRACTIONS[0]) * theta_max),
            softening_gain: 0.8,
            softening_recovery_s: 40.0,
        }
    }
}

impl ActuatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.length_mm > 0.0) {
            return bad("length_mm must be positive");
        }
        if !(self.wall_thickness_mm > 0.0 && self.outer_diameter_mm > 2.0 * self.wall_thickness_mm) {
            return bad("outer_diameter_mm must exceed twice wall_thickness_mm");
        }
        if !(self.p_max_bar > self.p_min_bar) {
            return bad("p_max_bar must exceed p_min_bar");
        }
        if !(self.steps_at_pmax > 0.0 && self.steps_at_theta_max > 0.0) {
            return bad("calibration step counts must be positive");
        }
        if !(self.theta_max_rad > 0.0 && self.theta_max_rad <= PI) {
            return bad("theta_max_rad must lie in (0, pi]");
        }
        if !(self.contact_stiffness_mn_per_rad >= 0.0) {
            return bad("contact stiffness must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.softening_gain) {
            return bad("softening_gain must lie in [0, 1]");
        }
        if !(self.softening_recovery_s > 0.0) {
            return bad("softening_recovery_s must be positive");
        }
        Ok(())
    }

    /// Chamber pressure when the pump sits at `steps_at_theta_max`.
    pub fn pressure_at_full_bend(&self) -> f64 {
        self.p_min_bar
            + (self.p_max_bar - self.p_min_bar) * self.steps_at_theta_max / self.steps_at_pmax
    }

    pub fn curvature_at_full_bend(&self) -> f64 {
        self.theta_max_rad / self.length_mm
    }

    /// Same actuator without stress softening.
    pub fn without_softening(mut self) -> Self {
        self.softening_gain = 0.0;
        self
    }
}

pub fn steps_to_pressure(steps: f64, cfg: &ActuatorConfig) -> Result<f64> {
    if !(steps >= 0.0) {
        return Err(Error::Domain(format!("negative pump position {steps}")));
    }
    Ok(cfg.p_min_bar + (cfg.p_max_bar - cfg.p_min_bar) * steps / cfg.steps_at_pmax)
}

/// Static free-bending law: curvature is affine in gauge pressure above
/// `p_min_bar`, reaching `theta_max_rad / length_mm` at `steps_at_theta_max`.
pub fn pressure_to_curvature(p_bar: f64, cfg: &ActuatorConfig) -> Result<f64> {
    if !(p_bar >= cfg.p_min_bar) {
        return Err(Error::Domain(format!(
            "pressure {p_bar} bar below resting pressure {} bar",
            cfg.p_min_bar
        )));
    }
    let span = cfg.pressure_at_full_bend() - cfg.p_min_bar;
    Ok((p_bar - cfg.p_min_bar) / span * cfg.curvature_at_full_bend())
}

/// Constant-curvature tip position `(y, z)` in the bending plane. `z` runs
/// along the undeformed backbone, `y` is the lateral deflection.
pub fn tip_position(curvature: f64, length_mm: f64) -> (f64, f64) {
    let theta = curvature * length_mm;
    if theta.abs() < 1e-6 {
        // Series expansion keeps the map smooth through the straight pose.
        let t2 = theta * theta;
        let y = length_mm * theta / 2.0 * (1.0 - t2 / 12.0);
        let z = length_mm * (1.0 - t2 / 6.0);
        return (y, z);
    }
    let r = 1.0 / curvature;
    let half = (0.5 * theta).sin();
    (2.0 * r * half * half, r * theta.sin())
}

/// Tip Y and Z ranges swept when the bending angle covers `[0, theta_max]`.
pub fn workspace_ranges(length_mm: f64, theta_max: f64) -> (f64, f64) {
    let y_peak_angle = lateral_peak_angle();
    let y_range = tip_position(theta_max.min(y_peak_angle) / length_mm, length_mm).0;
    let z_range = length_mm - tip_position(theta_max / length_mm, length_mm).1;
    (y_range, z_range)
}

/// Bending angle at which the lateral deflection peaks: the root of
/// `theta * sin(theta) = 1 - cos(theta)` in `(0, pi)`.
fn lateral_peak_angle() -> f64 {
    let f = |t: f64| t * t.sin() - (1.0 - t.cos());
    let (mut lo, mut hi) = (2.0_f64, 2.6_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares fit of the full-bend angle to target workspace ranges.
///
/// Dense scan over `(0, pi]` followed by golden-section refinement of the best
/// bracket. Deterministic.
pub fn calibrate_theta_max(length_mm: f64, y_range_mm: f64, z_range_mm: f64) -> f64 {
    let cost = |t: f64| {
        let (y, z) = workspace_ranges(length_mm, t);
        (y - y_range_mm).powi(2) + (z - z_range_mm).powi(2)
    };
    const N: usize = 2000;
    let grid = |k: usize| PI * k as f64 / N as f64;
    let best = (1..=N)
        .min_by(|&a, &b| cost(grid(a)).total_cmp(&cost(grid(b))))
        .unwrap_or(N);
    let (mut a, mut b) = (grid(best - 1).max(1e-6), grid((best + 1).min(N)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost(c) <= cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    ConstantPeaks,
    RandomPeaks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuationSignal {
    pub kind: SignalKind,
    pub peak_steps_min: u32,
    pub peak_steps_max: u32,
    pub constant_peak_steps: u32,
    pub velocity_steps_per_min: f64,
    /// When set, overrides the ramp velocity so one constant-peak cycle lasts
    /// exactly this long. Random-peak cycles keep the same slope.
    pub period_s: Option<f64>,
    /// Pump position the wave starts from and returns to between peaks.
    pub rest_steps: f64,
    pub duration_s: f64,
    pub seed: u64,
}

/// Cycle period that fits 58 constant-peak repetitions in ten minutes.
pub const REPRODUCTION_PERIOD_S: f64 = 600.0 / 58.0;

impl Default for ActuationSignal {
    fn default() -> Self {
        Self {
            kind: SignalKind::ConstantPeaks,
            peak_steps_min: 1000,
            peak_steps_max: 5000,
            constant_peak_steps: 4000,
            velocity_steps_per_min: 1500.0,
            period_s: Some(REPRODUCTION_PERIOD_S),
            rest_steps: 0.0,
            duration_s: 600.0,
            seed: 0,
        }
    }
}

impl ActuationSignal {
    pub fn constant_peaks(duration_s: f64) -> Self {
        Self {
            duration_s,
            ..Self::default()
        }
    }

    pub fn random_peaks(duration_s: f64, seed: u64) -> Self {
        Self {
            kind: SignalKind::RandomPeaks,
            duration_s,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.peak_steps_min <= self.constant_peak_steps
            && self.constant_peak_steps <= self.peak_steps_max)
        {
            return bad("peak bounds must bracket constant_peak_steps");
        }
        if self.peak_steps_min == 0 {
            return bad("peak_steps_min must be positive");
        }
        if !(self.rest_steps >= 0.0) {
            return bad("rest_steps must be non-negative");
        }
        let top = match self.kind {
            SignalKind::ConstantPeaks => self.constant_peak_steps,
            SignalKind::RandomPeaks => self.peak_steps_max,
        };
        if !(self.rest_steps < f64::from(top)) {
            return bad("rest_steps must lie below the peaks");
        }
        if !(self.velocity_steps_per_min > 0.0) {
            return bad("velocity_steps_per_min must be positive");
        }
        if let Some(p) = self.period_s {
            if !(p > 0.0) {
                return bad("period_s must be positive");
            }
        }
        if !(self.duration_s >= 0.0) {
            return bad("duration_s must be non-negative");
        }
        Ok(())
    }

    /// Ramp slope in steps per second.
    pub fn slope_steps_per_s(&self) -> f64 {
        match self.period_s {
            Some(period) => 2.0 * f64::from(self.constant_peak_steps) / period,
            None => self.velocity_steps_per_min / 60.0,
        }
    }
}

/// Piecewise-linear pump trajectory: vertices alternate between `rest_steps`
/// and a peak, with every ramp at the same slope. Random peaks are drawn above
/// the rest position.
#[derive(Debug, Clone)]
pub struct TriangleWave {
    /// `(time_s, steps)` vertices starting at `(0, rest)`.
    vertices: Vec<(f64, f64)>,
    rest: f64,
    duration_s: f64,
}

impl TriangleWave {
    pub fn new(sig: &ActuationSignal) -> Result<Self> {
        sig.validate()?;
        let slope = sig.slope_steps_per_s();
        let mut rng = ChaCha8Rng::seed_from_u64(sig.seed);
        let rest = sig.rest_steps;
        let mut vertices = vec![(0.0, rest)];
        let mut t = 0.0;
        while t < sig.duration_s {
            let peak = match sig.kind {
                SignalKind::ConstantPeaks => f64::from(sig.constant_peak_steps),
                SignalKind::RandomPeaks => rng.random_range(
                    f64::from(sig.peak_steps_min).max(rest)..=f64::from(sig.peak_steps_max),
                ),
            };
            let ramp = (peak - rest) / slope;
            vertices.push((t + ramp, peak));
            t += 2.0 * ramp;
            vertices.push((t, rest));
        }
        Ok(Self {
            vertices,
            rest,
            duration_s: sig.duration_s,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    /// Peak vertices `(time_s, steps)` in time order.
    pub fn peaks(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.vertices.iter().skip(1).step_by(2).copied()
    }

    pub fn cycle_count(&self) -> usize {
        self.vertices.len() / 2
    }

    pub fn steps_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.rest;
        }
        let k = self.vertices.partition_point(|&(tv, _)| tv <= t);
        if k >= self.vertices.len() {
            return self.vertices.last().map_or(self.rest, |v| v.1);
        }
        let (t0, s0) = self.vertices[k - 1];
        let (t1, s1) = self.vertices[k];
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }

    /// A virtual cycle identical to the first one, ending at `t = 0`. The
    /// actuator is taken as preconditioned by it, which makes constant-peak
    /// runs periodic from the first sample.
    fn preconditioning_peak(&self) -> (f64, f64) {
        match self.vertices.get(1) {
            Some(&(t_peak, peak)) => (-t_peak, peak),
            None => (0.0, 0.0),
        }
    }
}

pub fn sample_times(duration_s: f64, rate_hz: f64) -> Result<Vec<f64>> {
    if !(rate_hz > 0.0) {
        return Err(Error::Domain(format!("sample rate {rate_hz} Hz")));
    }
    let n = (duration_s * rate_hz + 1e-9).floor().max(0.0) as usize;
    Ok((0..n).map(|k| k as f64 / rate_hz).collect())
}

/// Pump position sampled at `rate_hz` over the signal duration.
pub fn generate_signal(sig: &ActuationSignal, rate_hz: f64) -> Result<Vec<f64>> {
    let wave = TriangleWave::new(sig)?;
    Ok(sample_times(sig.duration_s, rate_hz)?
        .into_iter()
        .map(|t| wave.steps_at(t))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactLocation {
    LocationA,
    LocationB,
    LocationC,
}

/// Contact angles as fractions of `theta_max_rad`; A is nearest the rest shape.
pub const LOCATION_FRACTIONS: [f64; 3] = [0.15, 0.45, 0.75];

impl ContactLocation {
    pub const ALL: [ContactLocation; 3] = [Self::LocationA, Self::LocationB, Self::LocationC];

    pub fn fraction(self) -> f64 {
        match self {
            Self::LocationA => LOCATION_FRACTIONS[0],
            Self::LocationB => LOCATION_FRACTIONS[1],
            Self::LocationC => LOCATION_FRACTIONS[2],
        }
    }

    pub fn letter(self) -> char {
        match self {
            Self::LocationA => 'a',
            Self::LocationB => 'b',
            Self::LocationC => 'c',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactScenario {
    pub contact_angle_rad: f64,
    pub label: ContactLocation,
}

impl ContactScenario {
    pub fn at(label: ContactLocation, cfg: &ActuatorConfig) -> Self {
        Self {
            contact_angle_rad: label.fraction() * cfg.theta_max_rad,
            label,
        }
    }

    /// Pump position whose nominal free bend meets the sensor.
    pub fn contact_steps(&self, cfg: &ActuatorConfig) -> f64 {
        self.contact_angle_rad / cfg.theta_max_rad * cfg.steps_at_theta_max
    }

    pub fn validate(&self, cfg: &ActuatorConfig) -> Result<()> {
        if !(self.contact_angle_rad >= 0.0 && self.contact_angle_rad < cfg.theta_max_rad) {
            return Err(Error::Config(format!(
                "contact angle {} outside [0, theta_max)",
                self.contact_angle_rad
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactResponse {
    pub force_mn: f64,
    /// Curvature after the sensor plane has stopped the tip.
    pub curvature_per_mm: f64,
}

/// Linear angular-spring contact against a plane met at `contact_angle_rad`.
pub fn contact_force(
    curvature_free: f64,
    scenario: &ContactScenario,
    cfg: &ActuatorConfig,
) -> Result<ContactResponse> {
    if !(curvature_free >= 0.0) {
        return Err(Error::Domain(format!("negative curvature {curvature_free}")));
    }
    let overshoot = curvature_free * cfg.length_mm - scenario.contact_angle_rad;
    if overshoot > 0.0 {
        Ok(ContactResponse {
            force_mn: cfg.contact_stiffness_mn_per_rad * overshoot,
            curvature_per_mm: scenario.contact_angle_rad / cfg.length_mm,
        })
    } else {
        Ok(ContactResponse {
            force_mn: 0.0,
            curvature_per_mm: curvature_free,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub t_s: f64,
    pub steps: f64,
    pub pressure_bar: f64,
    pub curvature_per_mm: f64,
    pub tip_y_mm: f64,
    pub tip_z_mm: f64,
    pub contact_force_mn: f64,
}

impl ActuatorState {
    pub fn bending_angle(&self, cfg: &ActuatorConfig) -> f64 {
        self.curvature_per_mm * cfg.length_mm
    }
}

/// Running record of the largest recent actuation, decaying with the
/// softening recovery time.
struct SofteningMemory {
    level: f64,
    at_s: f64,
    recovery_s: f64,
}

impl SofteningMemory {
    fn value_at(&self, t: f64) -> f64 {
        self.level * (-(t - self.at_s) / self.recovery_s).exp()
    }

    fn absorb_peak(&mut self, t: f64, level: f64) {
        self.level = self.value_at(t).max(level);
        self.at_s = t;
    }
}

/// Per-sample composition steps → pressure → curvature → (tip, force).
///
/// The compliance multiplier is `1 + gain * (m - u)` where `u` is the current
/// normalised pump position and `m >= u` the decayed envelope of past peaks, so
/// the loading curve through each new peak is the static law and bending never
/// exceeds `theta_max_rad` for `gain <= 1`. Deterministic given `sig.seed`.
pub fn simulate_trajectory(
    sig: &ActuationSignal,
    cfg: &ActuatorConfig,
    scenario: Option<&ContactScenario>,
    rate_hz: f64,
) -> Result<Vec<ActuatorState>> {
    cfg.validate()?;
    if let Some(s) = scenario {
        s.validate(cfg)?;
    }
    let wave = TriangleWave::new(sig)?;
    let times = sample_times(sig.duration_s, rate_hz)?;

    let full = cfg.steps_at_theta_max;
    let (t_pre, peak_pre) = wave.preconditioning_peak();
    let mut memory = SofteningMemory {
        level: peak_pre / full,
        at_s: t_pre,
        recovery_s: cfg.softening_recovery_s,
    };
    let mut peaks = wave.peaks().peekable();

    let mut out = Vec::with_capacity(times.len());
    for t in times {
        while let Some(&(tp, sp)) = peaks.peek() {
            if tp > t {
                break;
            }
            memory.absorb_peak(tp, sp / full);
            peaks.next();
        }
        let steps = wave.steps_at(t);
        let u = steps / full;
        let m = memory.value_at(t).max(u);
        let compliance = 1.0 + cfg.softening_gain * (m - u);

        let pressure_bar = steps_to_pressure(steps, cfg)?;
        let free = pressure_to_curvature(pressure_bar, cfg)? * compliance;
        let (curvature, force) = match scenario {
            Some(s) => {
                let c = contact_force(free, s, cfg)?;
                (c.curvature_per_mm, c.force_mn)
            }
            None => (free, 0.0),
        };
        let (tip_y_mm, tip_z_mm) = tip_position(curvature, cfg.length_mm);
        out.push(ActuatorState {
            t_s: t,
            steps,
            pressure_bar,
            curvature_per_mm: curvature,
            tip_y_mm,
            tip_z_mm,
            contact_force_mn: force,
        });
    }
    Ok(out)
}
