//! Run configuration: a TOML file whose keys the command-line flags mirror.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Top-level keys:
//!
//! | key          | meaning                                                  |
//! |--------------|----------------------------------------------------------|
//! | `seed`       | master seed; also the PPO seed                           |
//! | `task`       | `lk`, `lc` or `oa`                                       |
//! | `strategy`   | `baseline` or `rlrc` (evaluate)                          |
//! | `episodes`   | episodes per cell (transfer) or in total (evaluate)      |
//! | `out_dir`    | run directory; defaults under `$RLRC_OUT_DIR`            |
//! | `checkpoint` | policy checkpoint to load; train resumes from it         |
//! | `gap`        | `{ kind = "none" / "param_variation" / "side_force", level }` |
//!
//! Sections: `[vehicle]`, `[scenario]`, `[ppo]`, `[rlrc]` (with
//! `[rlrc.controller]` and `[rlrc.detector]`), `[train]`, `[transfer]`,
//! `[analyze]`. Their keys are the field names of the matching types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rlrc_core::dynamics::VehicleParams;
use rlrc_core::scenario::{ScenarioConfig, Task};
use rlrc_core::train::PpoConfig;
use rlrc_core::transfer::{GapKind, ModelingGap, RlrcConfig, Strategy};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Exit with the non-convergence code when the evaluation streak never
    /// completes.
    pub require_convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub tasks: Vec<Task>,
    pub strategies: Vec<Strategy>,
    /// Gap cells of the matrix. Replaced by the top-level `gap` when the
    /// `--gap` flag is given.
    pub gaps: Vec<ModelingGap>,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            tasks: Task::ALL.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            gaps: vec![ModelingGap::params(0.2), ModelingGap::side_force(5000.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    /// Perturbed vehicles drawn for bode and sensitivity.
    pub samples: usize,
    /// Parameter variation bound of those vehicles.
    pub bound: f64,
    /// Speed of the linear model, m/s.
    pub vx: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_points: usize,
    /// Previewed-curvature step, 1/m.
    pub step_kappa: f64,
    /// Step-response length, s.
    pub step_duration: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            samples: 100,
            bound: 0.2,
            vx: 20.0,
            omega_min: 0.1,
            omega_max: 100.0,
            omega_points: 200,
            step_kappa: 1e-3,
            step_duration: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Task,
    pub strategy: Strategy,
    pub episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub gap: ModelingGap,
    pub vehicle: VehicleParams,
    pub scenario: ScenarioConfig,
    pub ppo: PpoConfig,
    pub rlrc: RlrcConfig,
    pub train: TrainSection,
    pub transfer: TransferSection,
    pub analyze: AnalyzeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            task: Task::Lk,
            strategy: Strategy::Baseline,
            episodes: 10,
            out_dir: None,
            checkpoint: None,
            gap: ModelingGap::NONE,
            vehicle: VehicleParams::nominal(),
            scenario: ScenarioConfig::default(),
            ppo: PpoConfig::default(),
            rlrc: RlrcConfig::default(),
            train: TrainSection::default(),
            transfer: TransferSection::default(),
            analyze: AnalyzeSection::default(),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub strategy: Option<Strategy>,
    pub episodes: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub gap: Option<GapKind>,
    pub gap_level: Option<f64>,
    pub dob: Option<bool>,
}

/// Level used when `--gap` is given without `--gap-level`.
pub fn default_level(kind: GapKind) -> f64 {
    match kind {
        GapKind::None => 0.0,
        GapKind::ParamVariation => 0.2,
        GapKind::SideForce => 5000.0,
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    /// Applies flag overrides. The master seed is also the PPO seed. A gap
    /// flag selects a single gap cell for transfer.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.ppo.seed = self.seed;
        if let Some(task) = o.task {
            self.task = task;
            self.transfer.tasks = vec![task];
        }
        if let Some(strategy) = o.strategy {
            self.strategy = strategy;
            self.transfer.strategies = vec![strategy];
        }
        if let Some(n) = o.episodes {
            self.episodes = n;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = Some(dir.clone());
        }
        if let Some(path) = &o.checkpoint {
            self.checkpoint = Some(path.clone());
        }
        match (o.gap, o.gap_level) {
            (Some(kind), level) => {
                self.gap = ModelingGap {
                    kind,
                    level: level.unwrap_or_else(|| default_level(kind)),
                }
            }
            (None, Some(level)) => self.gap.level = level,
            (None, None) => {}
        }
        if o.gap.is_some() || o.gap_level.is_some() {
            self.transfer.gaps = vec![self.gap];
        }
        if let Some(dob) = o.dob {
            self.rlrc.controller.dob_enabled = dob;
        }
    }

    /// Field-level validation of everything a command may touch.
    pub fn validate(&self) -> Result<(), CliError> {
        let config = |e: rlrc_core::Error| CliError::Config(e.to_string());
        if self.seed > i64::MAX as u64 {
            return Err(CliError::Config(format!("invalid value for `seed`: must be <= {}", i64::MAX)));
        }
        self.vehicle.validate().map_err(config)?;
        self.scenario.validate().map_err(config)?;
        self.ppo.validate().map_err(config)?;
        self.rlrc.controller.validate().map_err(config)?;
        self.gap.validate().map_err(config)?;
        for gap in &self.transfer.gaps {
            gap.validate().map_err(config)?;
        }
        if self.rlrc.planning_horizon == 0 {
            return Err(CliError::Config("invalid value for `planning_horizon`: must be >= 1".into()));
        }
        let a = &self.analyze;
        if !(a.omega_min > 0.0 && a.omega_max > a.omega_min) || a.omega_points < 2 {
            return Err(CliError::Config(
                "invalid value for `omega_min`: need 0 < omega_min < omega_max and omega_points >= 2".into(),
            ));
        }
        if !(0.0..0.5).contains(&a.bound) {
            return Err(CliError::Config("invalid value for `bound`: must lie in [0, 0.5)".into()));
        }
        if !(a.step_duration > 0.0) {
            return Err(CliError::Config("invalid value for `step_duration`: must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(9),
            gap: Some(GapKind::SideForce),
            checkpoint: Some("a/b.ckpt".into()),
            ..Overrides::default()
        });
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.transfer.gaps, vec![ModelingGap::side_force(5000.0)]);
        assert_eq!(back.ppo.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1"), Err(CliError::Config(_))));
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = RunConfig::from_toml("[ppo]\neta = -1.0").unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("eta"), "{msg}");
    }
}
