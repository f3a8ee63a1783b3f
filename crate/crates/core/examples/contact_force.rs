//! Tip force against a stop placed at each of the three contact angles, with
//! the pump resting at zero and with the actuator pre-curved onto the stop.
//!
//! cargo run --release --example contact_force

use soft_eit::actuator::{simulate_trajectory, ActuationSignal, ActuatorConfig, ContactLocation, ContactScenario};

fn main() -> soft_eit::Result<()> {
    let cfg = ActuatorConfig::default();
    for loc in ContactLocation::ALL {
        let scenario = ContactScenario::at(loc, &cfg);
        for precurved in [false, true] {
            let mut sig = ActuationSignal::random_peaks(120.0, 1);
            if precurved {
                sig.rest_steps = scenario.contact_steps(&cfg);
            }
            let states = simulate_trajectory(&sig, &cfg, Some(&scenario), 62.5)?;
            let peak = states.iter().map(|s| s.contact_force_mn).fold(0.0, f64::max);
            let in_contact = states.iter().filter(|s| s.contact_force_mn > 0.0).count() as f64 / states.len() as f64;
            println!(
                "location {} ({}): contact at {:.3} rad, rest {:>4.0} steps, peak force {peak:5.1} mN, in contact {:3.0}% of the time",
                loc.letter().to_ascii_uppercase(),
                if precurved { "pre-curved" } else { "free start" },
                scenario.contact_angle_rad,
                sig.rest_steps,
                100.0 * in_contact
            );
        }
    }
    Ok(())
}
