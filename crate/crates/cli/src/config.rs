use std::path::{Path, PathBuf};

use pedpredict::autoencoder::AePretrainConfig;
use pedpredict::environments::CorridorSpec;
use pedpredict::eval::EvalConfig;
use pedpredict::predictor::{PredictorConfig, TrainConfig};
use pedpredict::simforces::SfParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub n_agents: usize,
    pub duration: f64,
    /// Occupancy map file; the procedural corridor is used when absent.
    pub map: Option<PathBuf>,
    pub corridor: CorridorSpec,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 0.3,
            n_agents: 10,
            duration: 300.0,
            map: None,
            corridor: CorridorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderSection {
    /// Local grids harvested from the dataset for pretraining.
    pub grids: usize,
    #[serde(flatten)]
    pub pretrain: AePretrainConfig,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        Self {
            grids: 200,
            pretrain: AePretrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub crowd_sizes: Vec<usize>,
    pub queries: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            crowd_sizes: vec![5, 10, 20, 40],
            queries: 100,
        }
    }
}

/// Everything a run needs; every field has a default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulation: SimulationSection,
    pub social_force: SfParams,
    pub autoencoder: AutoencoderSection,
    pub predictor: PredictorConfig,
    pub training: TrainConfig,
    pub evaluation: EvalConfig,
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: pedpredict::Error| CliError::Config(e.to_string());
        self.social_force.validate().map_err(cfg)?;
        self.predictor.validate().map_err(cfg)?;
        self.training.validate().map_err(cfg)?;
        if !(self.simulation.dt > 0.0) || self.simulation.n_agents == 0 || self.simulation.duration < 0.0 {
            return Err(CliError::Config(
                "simulation needs dt > 0, at least one agent and a non-negative duration".into(),
            ));
        }
        if (self.simulation.dt - self.predictor.dt).abs() > 1e-12 {
            return Err(CliError::Config("simulation.dt and predictor.dt differ".into()));
        }
        Ok(())
    }
}
