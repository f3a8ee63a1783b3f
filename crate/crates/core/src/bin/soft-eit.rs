use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use soft_eit::actuator::{simulate_trajectory, ActuationSignal, ContactLocation, ContactScenario};
use soft_eit::config::Config;
use soft_eit::dataset::{SequenceDataset, Split};
use soft_eit::eit::EitSensor;
use soft_eit::estimator::{predict, train, TrainedModel};
use soft_eit::experiments::{
    assemble, check_e1, check_e2, check_e4_channels, check_e4_snr, check_loss_decreased, record, run_experiment, test_metrics,
    train_config, Check, ExperimentId, ExperimentReport, ExperimentSpec, FeatureMode, RunArtifacts,
};
use soft_eit::protocol::default_protocol_13;
use soft_eit::trajectory::write_trajectory;
use soft_eit::{Error, Result};

#[derive(Parser)]
#[command(name = "soft-eit", version, about = "Soft actuator EIT simulation and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one actuation run and write trajectory.csv and protocol.txt.
    Simulate(SimulateArgs),
    /// Simulate a recording, train one estimator and save the checkpoint.
    Train(TrainArgs),
    /// Score a saved checkpoint on a dataset bundle.
    Evaluate(EvaluateArgs),
    /// Run reproduction presets and write reports.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration overriding preset sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// EIT noise standard deviation in ohms.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    Constant,
    Random,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SignalArg::Random)]
    signal: SignalArg,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 20.0)]
    rate: f64,
    /// Number of leading protocol channels to measure.
    #[arg(long, default_value_t = 9)]
    channels: usize,
    /// Contact location (a, b or c); free bending when omitted. The pump
    /// rests where the tip just touches the sensor.
    #[arg(long)]
    location: Option<char>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Preset supplying the signal and targets: e1, e2 or e4.
    #[arg(long, default_value = "e2")]
    experiment: String,
    #[arg(long, default_value = "pressure+eit")]
    features: String,
    #[arg(long, default_value_t = 4)]
    channels: usize,
    #[arg(long)]
    location: Option<char>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset bundle directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// e1, e2, e3, e4 or all.
    which: String,
    #[command(flatten)]
    common: Common,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Comma-separated channel counts.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<usize>>,
    /// Restrict to one feature mode.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Exit nonzero when a trend check fails.
    #[arg(long)]
    check: bool,
}

fn location(c: Option<char>) -> Result<Option<ContactLocation>> {
    c.map(|c| {
        ContactLocation::ALL
            .into_iter()
            .find(|l| l.letter().eq_ignore_ascii_case(&c))
            .ok_or_else(|| Error::Config(format!("location '{c}', expected a, b or c")))
    })
    .transpose()
}

fn base_spec(id: ExperimentId, mode: FeatureMode, common: &Common) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::preset(id, mode);
    if let Some(path) = &common.config {
        Config::load(path)?.apply(&mut spec);
    }
    if let Some(sigma) = common.noise {
        spec.noise.sigma_ohm = sigma;
    }
    Ok(spec)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = base_spec(ExperimentId::E2RandAmp, FeatureMode::PressureAndEit, &a.common)?;
    let mut signal = match a.signal {
        SignalArg::Constant => ActuationSignal::constant_peaks(a.duration),
        SignalArg::Random => ActuationSignal::random_peaks(a.duration, a.seed),
    };
    signal.period_s = spec.signal.period_s;
    let scenario = location(a.location)?.map(|l| ContactScenario::at(l, &spec.actuator));
    if let Some(s) = &scenario {
        signal.rest_steps = s.contact_steps(&spec.actuator);
    }
    let states = simulate_trajectory(&signal, &spec.actuator, scenario.as_ref(), a.rate)?;
    let protocol = default_protocol_13().subset(a.channels)?;
    let mut noise = spec.noise.clone();
    noise.seed = a.seed;
    let mut sensor = EitSensor::new(spec.actuator.clone(), spec.array, spec.chain_model.clone(), protocol.clone(), noise)?;
    let frames = sensor.measure_all(&states)?;
    let out = &a.common.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_trajectory(&out.join("trajectory.csv"), &states, Some(&frames))?;
    write_text(&out.join("protocol.txt"), &protocol.to_text())?;
    println!("{} samples, {} channels -> {}", states.len(), protocol.len(), out.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let id = ExperimentId::from_short(&a.experiment)?;
    let mode = FeatureMode::parse(&a.features)?;
    let mut spec = base_spec(id, mode, &a.common)?;
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    let loc = location(a.location)?.or(id.is_force().then_some(ContactLocation::LocationB));
    let channels = if mode == FeatureMode::PressureOnly { 0 } else { a.channels };
    spec.validate()?;

    let rec = record(&spec, loc, a.seed)?;
    let ds = assemble(&spec, &rec, channels)?;
    let out = &a.common.out;
    ds.write_bundle(&out.join("dataset"))?;
    let rep = train(&ds, &train_config(&spec, a.seed))?;
    if let Some(epoch) = rep.diverged_at {
        return Err(Error::Diverged { epoch });
    }
    let model = TrainedModel::new(rep.params.clone(), &ds);
    model.save(&out.join("model.json"))?;
    let artifacts = evaluate_split(&model, &ds, id.is_force(), out)?;
    RunArtifacts {
        train_loss: rep.train_loss,
        val_loss: rep.val_loss,
        ..artifacts
    }
    .write_loss_curve(&out.join("loss_curve.csv"))?;
    println!("trained in {:.1} s -> {}", rep.wall_time_s, out.display());
    Ok(())
}

/// Writes predictions.csv and report.json for the test split.
fn evaluate_split(model: &TrainedModel, ds: &SequenceDataset, force: bool, out: &Path) -> Result<RunArtifacts> {
    if !model.matches(ds) {
        return Err(Error::Shape("checkpoint columns do not match the dataset".into()));
    }
    let pred = predict(&model.params, ds, Split::Test)?;
    let truth = SequenceDataset::select_rows(&ds.raw_targets(), &ds.test_rows);
    let metrics = test_metrics(&pred, &truth, force)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("report.json"), &serde_json::to_string_pretty(&metrics)?)?;
    let artifacts = RunArtifacts {
        variant: String::new(),
        seed: 0,
        time_s: ds.test_rows.iter().map(|&r| ds.time_s[r]).collect(),
        target_names: ds.target_names.clone(),
        truth,
        prediction: pred,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
    };
    artifacts.write_predictions(&out.join("predictions.csv"))?;
    match metrics.rmse_plane {
        Some(p) => println!("test plane RMSE {p:.3} mm"),
        None => println!("test mean |error| {:.3}", metrics.mean_abs_err),
    }
    Ok(artifacts)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let ds = SequenceDataset::read_bundle(&a.data)?;
    let force = ds.target_names.iter().any(|n| n.starts_with("force"));
    evaluate_split(&model, &ds, force, &a.out).map(|_| ())
}

fn reproduce(a: ReproduceArgs) -> Result<bool> {
    let ids: Vec<ExperimentId> = if a.which.eq_ignore_ascii_case("all") {
        ExperimentId::ALL.to_vec()
    } else {
        vec![ExperimentId::from_short(&a.which)?]
    };
    let only = a.features.as_deref().map(FeatureMode::parse).transpose()?;
    let mut checks = Vec::new();
    for id in ids {
        let modes = match id {
            ExperimentId::E1ConstAmp | ExperimentId::E2RandAmp => vec![FeatureMode::PressureOnly, FeatureMode::PressureAndEit],
            _ => vec![FeatureMode::PressureAndEit],
        };
        let mut reports: Vec<ExperimentReport> = Vec::new();
        for mode in modes.into_iter().filter(|m| only.is_none_or(|o| o == *m)) {
            let mut spec = base_spec(id, mode, &a.common)?;
            spec.seeds = (a.seed..a.seed + a.seeds).collect();
            if let Some(c) = &a.channels {
                spec.channel_counts = c.clone();
            }
            if let Some(e) = a.epochs {
                spec.train.epochs = e;
            }
            let report = run_experiment(&spec)?;
            let dir = a.common.out.join(id.short()).join(match mode {
                FeatureMode::PressureOnly => "pressure",
                FeatureMode::PressureAndEit => "pressure+eit",
            });
            report.write(&dir)?;
            for v in &report.variants {
                match (v.rmse_plane, v.mean_abs_err) {
                    (Some(p), _) => println!("{} {}: plane RMSE {:.3} ± {:.3} mm", id.short(), v.variant, p.mean, p.std),
                    (None, Some(m)) => println!("{} {}: mean |error| {:.3} ± {:.3} mN", id.short(), v.variant, m.mean, m.std),
                    _ => println!("{} {}: no successful runs", id.short(), v.variant),
                }
            }
            for f in &report.failures {
                println!("{} {} seed {} failed at {}: {}", id.short(), f.variant, f.seed, f.stage, f.error);
            }
            reports.push(report);
        }
        checks.extend(checks_for(id, &reports));
        checks.push(check_loss_decreased(&reports.iter().collect::<Vec<_>>()));
    }
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn checks_for(id: ExperimentId, reports: &[ExperimentReport]) -> Vec<Check> {
    match id {
        ExperimentId::E1ConstAmp => vec![check_e1(&reports.iter().collect::<Vec<_>>(), 0.10)],
        ExperimentId::E2RandAmp if reports.len() == 2 => vec![check_e2(&reports[0], &reports[1], 0.6)],
        ExperimentId::E4ForceAngles => reports
            .iter()
            .flat_map(|r| {
                let few = *r.spec.channel_counts.iter().min().unwrap_or(&1);
                let many = *r.spec.channel_counts.iter().max().unwrap_or(&8);
                [check_e4_channels(r, few, many), check_e4_snr(r)]
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Train(a) => train_cmd(a).map(|_| true),
        Command::Evaluate(a) => evaluate(a).map(|_| true),
        Command::Reproduce(a) => {
            let check = a.check;
            reproduce(a).map(|ok| ok || !check)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
