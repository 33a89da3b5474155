//! Command-line front end: simulate, pretrain-ae, train, predict, evaluate, bench.

// `!(x > 0)` checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pedpredict::autoencoder::{harvest_grids, pretrain};
use pedpredict::eval::{
    evaluate, forecast_snapshot, linear_fit, timing_benchmark, ConstantAcceleration, ConstantVelocity, ErrorReport,
    Forecaster, GroundTruthOracle, SocialForceBaseline,
};
use pedpredict::io::{load_dataset, load_map, load_weights, save_dataset, save_weights, WeightArchive};
use pedpredict::predictor::{Predictor, PredictorConfig};
use pedpredict::simforces::{generate_dataset, SimConfig};
use pedpredict::{Dataset, Error};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Runtime(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::DtMismatch { .. } => CliError::Config(e.to_string()),
            Error::Io(_) | Error::Parse { .. } | Error::Checksum | Error::Version(_) | Error::UnknownSection(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "pedpredict", version, about = "Pedestrian motion prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PredictorKind {
    Lstm,
    Cv,
    Cacc,
    Sf,
    Oracle,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a social-force dataset (writes dataset.txt and map.txt).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain the grid autoencoder on local grids harvested from a dataset.
    PretrainAe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Weight archive to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the predictor. Repeat --dataset for a curriculum (easiest first).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        dataset: Vec<PathBuf>,
        /// Archive holding the pretrained autoencoder.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Drop the occupancy-grid channel.
        #[arg(long)]
        no_grid: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast every agent present at one time index; writes CSV.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        time: i64,
        #[arg(long, value_enum, default_value = "lstm")]
        predictor: PredictorKind,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictor on a dataset; writes report.csv and report.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "lstm")]
        predictor: PredictorKind,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time per-agent inference across crowd sizes; writes JSON.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn weights_for(path: Option<&Path>, what: &str) -> Result<WeightArchive, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("--weights is required for {what}")))?;
    Ok(load_weights(path)?)
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let map = match &cfg.simulation.map {
        Some(p) => load_map(p)?,
        None => cfg.simulation.corridor.build(),
    };
    let goal_regions = if cfg.simulation.map.is_some() {
        Vec::new()
    } else {
        cfg.simulation.corridor.end_regions()
    };
    let sim = SimConfig {
        dt: cfg.simulation.dt,
        n_agents: cfg.simulation.n_agents,
        duration: cfg.simulation.duration,
        rng_seed: cfg.seed,
        environment: map,
        goal_regions,
    };
    let dataset = generate_dataset(&sim, &cfg.social_force)?;
    create_dir(out)?;
    save_dataset(&out.join("dataset.txt"), &dataset, &out.join("map.txt"))?;
    println!(
        "wrote {} trajectories ({} samples) to {}",
        dataset.trajectories.len(),
        dataset.sample_count(),
        out.display()
    );
    Ok(())
}

fn pretrain_ae(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let data: Dataset = load_dataset(dataset)?;
    let grids = harvest_grids(&data, cfg.autoencoder.grids, cfg.seed)?;
    let mut ae = pedpredict::autoencoder::Autoencoder::new(cfg.seed);
    let settings = pedpredict::autoencoder::AePretrainConfig {
        seed: cfg.seed,
        ..cfg.autoencoder.pretrain
    };
    let curve = pretrain(&mut ae, &grids, &settings)?;
    let mut archive = WeightArchive::new();
    archive.insert_autoencoder(&ae);
    save_weights(out, &archive)?;
    println!(
        "autoencoder loss {:.3} -> {:.3} over {} steps",
        curve.first().unwrap_or(0.0),
        curve.last().unwrap_or(0.0),
        curve.losses.len()
    );
    Ok(())
}

fn train(cfg: &RunConfig, datasets: &[PathBuf], weights: Option<&Path>, no_grid: bool, out: &Path) -> Result<(), CliError> {
    let config = PredictorConfig {
        use_grid: cfg.predictor.use_grid && !no_grid,
        ..cfg.predictor
    };
    let mut archive = WeightArchive::new();
    let ae = if config.use_grid {
        let ae = weights_for(weights, "the grid channel")?.autoencoder()?;
        archive.insert_autoencoder(&ae);
        Some(ae)
    } else {
        None
    };
    let mut model = Predictor::new(config, ae.as_ref(), cfg.seed)?;
    for (stage, path) in datasets.iter().enumerate() {
        let data: Dataset = load_dataset(path)?;
        let sequences = model.build_sequences(&data)?;
        let hyper = pedpredict::predictor::TrainConfig {
            seed: cfg.seed.wrapping_add(stage as u64),
            ..cfg.training
        };
        let report = model.fit(&sequences, &hyper)?;
        println!(
            "stage {} ({}): {} optimizer steps, epoch losses {:?}",
            stage + 1,
            path.display(),
            report.optimizer_steps,
            report.epoch_losses
        );
    }
    archive.insert_predictor(&model);
    save_weights(out, &archive)?;
    Ok(())
}

fn with_forecaster<R>(
    kind: PredictorKind,
    cfg: &RunConfig,
    weights: Option<&Path>,
    run: impl FnOnce(&dyn Run) -> Result<R, CliError>,
) -> Result<R, CliError> {
    match kind {
        PredictorKind::Lstm => run(&Wrap(weights_for(weights, "the lstm predictor")?.predictor::<f64>()?)),
        PredictorKind::Cv => run(&Wrap(ConstantVelocity)),
        PredictorKind::Cacc => run(&Wrap(ConstantAcceleration)),
        PredictorKind::Sf => run(&Wrap(SocialForceBaseline {
            params: cfg.social_force,
        })),
        PredictorKind::Oracle => run(&Wrap(GroundTruthOracle)),
    }
}

/// Object-safe view of a forecaster for the subcommands.
trait Run {
    fn evaluate(&self, data: &Dataset, cfg: &RunConfig) -> Result<ErrorReport, CliError>;
    fn snapshot(&self, data: &Dataset, time: i64, horizon: usize) -> Result<Vec<(u64, Vec<pedpredict::Vec2>)>, CliError>;
}

struct Wrap<F>(F);

impl<F: Forecaster<f64>> Run for Wrap<F> {
    fn evaluate(&self, data: &Dataset, cfg: &RunConfig) -> Result<ErrorReport, CliError> {
        Ok(evaluate(&self.0, data, &cfg.evaluation)?)
    }

    fn snapshot(&self, data: &Dataset, time: i64, horizon: usize) -> Result<Vec<(u64, Vec<pedpredict::Vec2>)>, CliError> {
        Ok(forecast_snapshot(&self.0, data, time, horizon)?)
    }
}

fn bench(cfg: &RunConfig, weights: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model: Predictor<f64> = load_weights(weights)?.predictor()?;
    let map = cfg.simulation.corridor.build();
    let results = timing_benchmark(&model, &map, &cfg.bench.crowd_sizes, cfg.bench.queries, cfg.seed)?;
    for r in &results {
        println!(
            "N={:>3}: {:.3} ± {:.3} ms per agent, {:.2} ms per frame",
            r.n_agents, r.per_agent_mean_ms, r.per_agent_std_ms, r.frame_mean_ms
        );
    }
    if results.len() >= 2 {
        let xs: Vec<f64> = results.iter().map(|r| r.n_agents as f64).collect();
        let ys: Vec<f64> = results.iter().map(|r| r.frame_mean_ms).collect();
        let (_, slope, r2) = linear_fit(&xs, &ys)?;
        println!("frame time slope {slope:.3} ms/agent, R² {r2:.3}");
    }
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&results).map_err(|e| CliError::Runtime(e.to_string()))?;
        write(path, json)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, out } => simulate(&load_config(&common)?, &out),
        Command::PretrainAe { common, dataset, out } => pretrain_ae(&load_config(&common)?, &dataset, &out),
        Command::Train {
            common,
            dataset,
            weights,
            no_grid,
            out,
        } => train(&load_config(&common)?, &dataset, weights.as_deref(), no_grid, &out),
        Command::Predict {
            common,
            dataset,
            time,
            predictor,
            weights,
            out,
        } => {
            let cfg = load_config(&common)?;
            let data: Dataset = load_dataset(&dataset)?;
            let horizon = cfg.evaluation.horizon;
            let forecasts = with_forecaster(predictor, &cfg, weights.as_deref(), |f| f.snapshot(&data, time, horizon))?;
            let mut csv = String::from("agent_id,step,x,y\n");
            for (id, positions) in forecasts {
                for (k, p) in positions.iter().enumerate() {
                    csv.push_str(&format!("{id},{},{},{}\n", k + 1, p.x, p.y));
                }
            }
            match out {
                Some(path) => write(&path, csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Evaluate {
            common,
            dataset,
            predictor,
            weights,
            out,
        } => {
            let cfg = load_config(&common)?;
            let data: Dataset = load_dataset(&dataset)?;
            let report = with_forecaster(predictor, &cfg, weights.as_deref(), |f| f.evaluate(&data, &cfg))?;
            create_dir(&out)?;
            write(&out.join("report.csv"), report.to_csv())?;
            write(&out.join("report.json"), report.to_json())?;
            println!(
                "{}: average error {:.4} m over {} forecasts",
                report.forecaster, report.average, report.samples
            );
            Ok(())
        }
        Command::Bench { common, weights, out } => bench(&load_config(&common)?, &weights, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
