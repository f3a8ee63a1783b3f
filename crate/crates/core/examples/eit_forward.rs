//! Forward EIT on the electrode chain: one frame at rest and at full bend,
//! plus a reciprocity check.
//!
//! cargo run --release --example eit_forward

use soft_eit::actuator::{ActuatorConfig, ActuatorState};
use soft_eit::eit::{build_chain, ChainModel, ElectrodeArray, EitSensor, NoiseModel};
use soft_eit::protocol::default_protocol_13;

fn state(curvature: f64, pressure: f64) -> ActuatorState {
    ActuatorState {
        t_s: 0.0,
        steps: 0.0,
        pressure_bar: pressure,
        curvature_per_mm: curvature,
        tip_y_mm: 0.0,
        tip_z_mm: 0.0,
        contact_force_mn: 0.0,
    }
}

fn main() -> soft_eit::Result<()> {
    let cfg = ActuatorConfig::default();
    let array = ElectrodeArray::default();
    let model = ChainModel::default();
    let sensor = EitSensor::new(cfg.clone(), array, model.clone(), default_protocol_13(), NoiseModel::noiseless())?;

    let rest = state(0.0, cfg.p_min_bar);
    let bent = state(cfg.curvature_at_full_bend(), cfg.pressure_at_full_bend());
    let z0 = sensor.clean_frame(&rest)?;
    let z1 = sensor.clean_frame(&bent)?;
    println!("{:<28} {:>10} {:>10}", "channel", "rest", "full bend");
    for ((ch, a), b) in sensor.protocol.channels.iter().zip(&z0).zip(&z1) {
        println!("{:<28} {a:>10.3} {b:>10.3}", ch.to_string());
    }

    let solver = build_chain(&bent, &cfg, &array, &model)?.solver()?;
    let forward = solver.transfer_impedance((1, 13), (4, 10))?;
    let swapped = solver.transfer_impedance((4, 10), (1, 13))?;
    println!("reciprocity: {forward:.9} vs {swapped:.9} ohm");
    Ok(())
}
