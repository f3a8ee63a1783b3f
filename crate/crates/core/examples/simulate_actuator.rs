//! Constant and random triangle-wave actuation, written as trajectory CSV.
//!
//! cargo run --release --example simulate_actuator -- [out_dir]

use std::path::PathBuf;

use soft_eit::actuator::{simulate_trajectory, workspace_ranges, ActuationSignal, ActuatorConfig, TriangleWave};
use soft_eit::trajectory::write_trajectory;

fn main() -> soft_eit::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/simulate".into()));
    std::fs::create_dir_all(&out).map_err(|e| soft_eit::Error::io(&out, e))?;
    let cfg = ActuatorConfig::default();
    let (ry, rz) = workspace_ranges(cfg.length_mm, cfg.theta_max_rad);
    println!("theta_max {:.3} rad, workspace {ry:.1} x {rz:.1} mm", cfg.theta_max_rad);

    for (name, sig) in [
        ("constant", ActuationSignal::constant_peaks(120.0)),
        ("random", ActuationSignal::random_peaks(120.0, 7)),
    ] {
        let wave = TriangleWave::new(&sig)?;
        let states = simulate_trajectory(&sig, &cfg, None, 20.0)?;
        let max_y = states.iter().map(|s| s.tip_y_mm).fold(0.0, f64::max);
        println!("{name}: {} cycles, {} samples, max tip y {max_y:.1} mm", wave.cycle_count(), states.len());
        write_trajectory(&out.join(format!("{name}.csv")), &states, None)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
