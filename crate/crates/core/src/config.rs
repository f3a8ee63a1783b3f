//! Declarative run configuration loaded from TOML.
//!
//! Every section is optional; a present section replaces the corresponding
//! preset value wholesale, with unspecified keys taking their defaults.
//!
//! ```toml
//! [noise]
//! sigma_ohm = 0.2
//!
//! [train]
//! epochs = 40
//! hidden_dim = 32
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actuator::{ActuationSignal, ActuatorConfig};
use crate::eit::{ChainModel, ElectrodeArray, NoiseModel};
use crate::error::{Error, Result};
use crate::estimator::TrainConfig;
use crate::experiments::ExperimentSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub actuator: Option<ActuatorConfig>,
    pub signal: Option<ActuationSignal>,
    pub array: Option<ElectrodeArray>,
    pub chain: Option<ChainModel>,
    pub noise: Option<NoiseModel>,
    pub train: Option<TrainConfig>,
    pub run: Option<RunSection>,
}

/// Experiment-level overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: Option<f64>,
    pub test_ratio: Option<f64>,
    pub sample_rate_hz: Option<f64>,
    pub precurve_contact: Option<bool>,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(a) = &self.actuator {
            spec.actuator = a.clone();
        }
        if let Some(s) = &self.signal {
            spec.signal = s.clone();
        }
        if let Some(a) = self.array {
            spec.array = a;
        }
        if let Some(c) = &self.chain {
            spec.chain_model = c.clone();
        }
        if let Some(n) = &self.noise {
            spec.noise = n.clone();
        }
        if let Some(t) = &self.train {
            spec.train = t.clone();
        }
        if let Some(r) = &self.run {
            if let Some(d) = r.duration_s {
                spec.duration_s = d;
            }
            if let Some(t) = r.test_ratio {
                spec.test_ratio = t;
            }
            if let Some(h) = r.sample_rate_hz {
                spec.sample_rate_hz = h;
            }
            if let Some(p) = r.precurve_contact {
                spec.precurve_contact = p;
            }
        }
    }
}
