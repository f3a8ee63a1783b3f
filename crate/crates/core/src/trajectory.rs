//! Trajectory CSV: actuator state columns optionally followed by `z1..zK`.

use std::path::Path;

use crate::actuator::ActuatorState;
use crate::dataset::{csv_err, csv_reader, csv_writer, parse_f64};
use crate::eit::EitFrame;
use crate::error::{Error, Result};

pub const STATE_COLUMNS: [&str; 7] = [
    "t_s",
    "steps",
    "pressure_bar",
    "curvature_per_mm",
    "tip_y_mm",
    "tip_z_mm",
    "force_mN",
];

/// Writes one row per state. `frames`, when given, must match `states` in
/// length and carry the same channel count.
pub fn write_trajectory(path: &Path, states: &[ActuatorState], frames: Option<&[EitFrame]>) -> Result<()> {
    let k = match frames {
        Some(f) if f.len() != states.len() => {
            return Err(Error::Shape(format!("{} frames for {} states", f.len(), states.len())))
        }
        Some(f) => f.first().map_or(0, |fr| fr.z_ohm.len()),
        None => 0,
    };
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = STATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("z{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, s) in states.iter().enumerate() {
        let mut rec: Vec<String> = [
            s.t_s,
            s.steps,
            s.pressure_bar,
            s.curvature_per_mm,
            s.tip_y_mm,
            s.tip_z_mm,
            s.contact_force_mn,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        if let Some(f) = frames {
            if f[i].z_ohm.len() != k {
                return Err(Error::Shape(format!("frame {i} has {} channels, expected {k}", f[i].z_ohm.len())));
            }
            rec.extend(f[i].z_ohm.iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_trajectory`]; frames are empty when no `z` columns exist.
pub fn read_trajectory(path: &Path) -> Result<(Vec<ActuatorState>, Vec<EitFrame>)> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < STATE_COLUMNS.len() || header.iter().zip(STATE_COLUMNS).any(|(h, c)| h != c) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header starting {}", STATE_COLUMNS.join(",")),
        });
    }
    let k = header.len() - STATE_COLUMNS.len();
    let mut states = Vec::new();
    let mut frames = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let v: Vec<f64> = rec.iter().map(|f| parse_f64(f, line)).collect::<Result<_>>()?;
        if v.len() != header.len() {
            return Err(Error::Parse { line, msg: "wrong field count".into() });
        }
        states.push(ActuatorState {
            t_s: v[0],
            steps: v[1],
            pressure_bar: v[2],
            curvature_per_mm: v[3],
            tip_y_mm: v[4],
            tip_z_mm: v[5],
            contact_force_mn: v[6],
        });
        if k > 0 {
            frames.push(EitFrame {
                t_s: v[0],
                z_ohm: v[7..].to_vec(),
            });
        }
    }
    Ok((states, frames))
}
