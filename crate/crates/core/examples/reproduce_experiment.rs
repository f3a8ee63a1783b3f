//! A shortened random-amplitude tip experiment comparing pressure alone with
//! pressure plus four EIT channels.
//!
//! cargo run --release --example reproduce_experiment -- [out_dir]

use std::path::PathBuf;

use soft_eit::experiments::{check_e2, run_experiment, ExperimentId, ExperimentSpec, FeatureMode};

fn main() -> soft_eit::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/e2".into()));
    let mut reports = Vec::new();
    for (mode, dir) in [(FeatureMode::PressureOnly, "pressure"), (FeatureMode::PressureAndEit, "pressure+eit")] {
        let mut spec = ExperimentSpec::preset(ExperimentId::E2RandAmp, mode);
        spec.seeds = vec![0, 1];
        spec.duration_s = 600.0;
        let report = run_experiment(&spec)?;
        for v in &report.variants {
            let p = v.rmse_plane.expect("tip experiment");
            println!("{:<9} plane RMSE {:.3} ± {:.3} mm", v.variant, p.mean, p.std);
        }
        report.write(&out.join(dir))?;
        reports.push(report);
    }
    println!("{}", check_e2(&reports[0], &reports[1], 0.6));
    Ok(())
}
