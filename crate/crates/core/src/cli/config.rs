use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fdm::DEFAULT_NX;
use crate::network::{InputScaling, MlpConfig, ModelKind};
use crate::optim::{TrainSchedule, WeightMode};
use crate::problems::ProblemId;
use crate::sampler::{Counts, Strategy};
use crate::sann::sann_config;

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub model: ModelKind,
    pub mlp: MlpConfig,
    pub schedule: TrainSchedule,
    pub counts: Counts,
    pub strategy: Strategy,
    pub seed: u64,
    pub eval_nx: usize,
    pub eval_nt: usize,
    pub fdm_nx: usize,
    pub fdm_dt: Option<f64>,
    pub out_dir: PathBuf,
    pub deterministic: bool,
    /// Epochs between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
}

impl ExperimentConfig {
    pub fn defaults(problem: ProblemId, model: ModelKind) -> Self {
        let spec = problem.spec();
        let mlp = match model {
            ModelKind::Sann => sann_config(&spec),
            _ => MlpConfig::new(4, 55, model.outputs().unwrap_or(1)).with_scaling(Some(InputScaling {
                x_range: spec.x_domain,
                t_range: spec.t_domain,
            })),
        };
        ExperimentConfig {
            problem,
            model,
            mlp,
            schedule: TrainSchedule::for_problem(problem),
            counts: Counts::defaults(problem),
            strategy: Strategy::UniformRandom,
            seed: 0,
            eval_nx: 101,
            eval_nt: 101,
            fdm_nx: DEFAULT_NX,
            fdm_dt: None,
            out_dir: PathBuf::from("runs").join(format!("{}_{}", problem, model)),
            deterministic: true,
            checkpoint_every: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.eval_nx < 2 || self.eval_nt < 2 || self.fdm_nx < 5 {
            return Err(Error::InvalidArgument(
                "evaluation grid needs 2+ points per axis and the FDM grid 5+ nodes".into(),
            ));
        }
        if let Some(outputs) = self.model.outputs() {
            self.mlp.validate()?;
            if self.mlp.outputs != outputs {
                return Err(Error::OutputArity {
                    expected: outputs,
                    found: self.mlp.outputs,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 over the config with the output directory blanked, so the
    /// same inputs hash equally wherever they are written.
    pub fn input_hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn fixed_weights(mut self) -> Self {
        self.schedule.weight_mode = WeightMode::Fixed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub input_hash: String,
    pub seeds: Vec<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub version: String,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(config: &ExperimentConfig) -> Result<Self> {
        Ok(RunManifest {
            config: config.clone(),
            input_hash: config.input_hash()?,
            seeds: vec![config.seed],
            started_unix: unix_now(),
            finished_unix: 0.0,
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Stamps the end time and writes `manifest.json`, which lists itself.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_unix = unix_now();
        if !self.artifacts.iter().any(|a| a == "manifest.json") {
            self.artifacts.push("manifest.json".into());
        }
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self)?)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        for p in ProblemId::ALL {
            for m in [ModelKind::Pinn, ModelKind::Apinn, ModelKind::Fdm, ModelKind::Sann] {
                let c = ExperimentConfig::defaults(p, m);
                c.validate().unwrap();
                assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
            }
        }
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::defaults(ProblemId::P1, ModelKind::Apinn);
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.input_hash().unwrap(), b.input_hash().unwrap());
        b.seed = 1;
        assert_ne!(a.input_hash().unwrap(), b.input_hash().unwrap());
        assert_eq!(a.input_hash().unwrap().len(), 64);
    }

    #[test]
    fn arity_checked() {
        let mut c = ExperimentConfig::defaults(ProblemId::P2, ModelKind::Apinn);
        c.mlp.outputs = 1;
        assert!(matches!(c.validate(), Err(Error::OutputArity { .. })));
    }

    #[test]
    fn defaults_follow_problem() {
        let c = ExperimentConfig::defaults(ProblemId::P3, ModelKind::Apinn);
        assert_eq!(c.counts.n_f, 1000);
        assert_eq!(c.schedule.total_epochs, 10_000);
        assert_eq!(c.mlp.n_params(), 9517);
    }
}
