//! Resample 125 Hz tip truth to the 20 Hz frame clock, align with pressure
//! and impedance, split and normalise, then write a dataset bundle.
//!
//! cargo run --release --example dataset_pipeline -- [out_dir]

use std::path::PathBuf;

use soft_eit::dataset::{column_means, SequenceDataset};
use soft_eit::experiments::{assemble, record, ExperimentId, ExperimentSpec, FeatureMode};

fn main() -> soft_eit::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/dataset".into()));
    let mut spec = ExperimentSpec::preset(ExperimentId::E2RandAmp, FeatureMode::PressureAndEit);
    spec.duration_s = 120.0;

    let rec = record(&spec, None, 0)?;
    println!(
        "truth {} samples at {} Hz, pressure {} and impedance {} frames at {} Hz",
        rec.truth.len(),
        rec.truth.rate_hz,
        rec.pressure.len(),
        rec.impedance.len(),
        rec.pressure.rate_hz
    );
    let ds = assemble(&spec, &rec, 4)?;
    println!("features {:?}", ds.feature_names);
    println!("targets  {:?}", ds.target_names);
    println!("train rows {}, test rows {}", ds.train_rows.len(), ds.test_rows.len());
    let train = SequenceDataset::select_rows(&ds.features, &ds.train_rows);
    println!("normalised training means {:.2e}", column_means(&train));

    ds.write_bundle(&out)?;
    let back = SequenceDataset::read_bundle(&out)?;
    println!("bundle round trip equal: {}", back.train_rows == ds.train_rows && back.target_names == ds.target_names);
    Ok(())
}
