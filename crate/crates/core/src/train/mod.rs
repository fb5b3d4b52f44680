//! PPO training of the lane-tracking policy on the nominal vehicle.

pub mod adam;
pub mod ppo;
pub mod rollout;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SideForce, VehicleParams};
use crate::error::{Error, Result};
use crate::policy::{Checkpoint, GaussianPolicy, Mlp, OBS_DIM};
use crate::scenario::{Env, Road, ScenarioConfig, Task, TerminationCause};

pub use adam::Adam;
pub use ppo::{loss_and_grad, ppo_update, LossParts, PpoOptimizer};
pub use rollout::{Collector, EpisodeStats, RolloutBuffer, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    /// Transitions per iteration.
    pub batch_size: usize,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    /// Lateral-error weight of the reward; overrides the scenario value.
    pub eta: f64,
    pub gamma: f64,
    pub epochs_per_iter: usize,
    pub minibatches: usize,
    pub gae_lambda: f64,
    pub max_iterations: u64,
    pub seed: u64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub init_log_std: f64,
    /// Multiplies rewards before value regression and advantage estimation.
    pub reward_scale: f64,
    pub normalize_advantages: bool,
    pub max_grad_norm: Option<f64>,
    pub log_every: u64,
    /// Deterministic evaluation episodes run at every log row.
    pub eval_episodes: usize,
    /// Consecutive fully successful evaluations that count as sustained.
    pub success_streak: usize,
    pub stop_on_success: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            clip_epsilon: 0.2,
            learning_rate: 1e-3,
            eta: 20.0,
            gamma: 0.99,
            epochs_per_iter: 10,
            minibatches: 1,
            gae_lambda: 0.95,
            max_iterations: 20_000,
            seed: 0,
            value_coef: 0.5,
            entropy_coef: 0.0,
            init_log_std: -0.5,
            reward_scale: 0.01,
            normalize_advantages: true,
            max_grad_norm: Some(0.5),
            log_every: 100,
            eval_episodes: 5,
            success_streak: 2,
            stop_on_success: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be > 0"));
        }
        if !(self.clip_epsilon >= 0.0) {
            return Err(Error::invalid("clip_epsilon", "must be >= 0"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1]"));
        }
        if !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return Err(Error::invalid("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::invalid("reward_scale", "must be > 0"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every", "must be > 0"));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: u64,
    pub mean_discounted_return: f64,
    pub mean_episode_length: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
}

impl LogRow {
    pub const HEADER: [&'static str; 6] = [
        "iteration",
        "mean_discounted_return",
        "mean_episode_length",
        "policy_loss",
        "value_loss",
        "clip_fraction",
    ];
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    /// First iteration at which the evaluation streak completed.
    pub success_iteration: Option<u64>,
}

impl TrainOutcome {
    pub fn converged(&self) -> bool {
        self.success_iteration.is_some()
    }
}

/// Fresh actor-critic pair for lane tracking.
pub fn initial_checkpoint(params: &VehicleParams, cfg: &PpoConfig) -> Checkpoint {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let policy = GaussianPolicy::lane_tracking(params, cfg.init_log_std, &mut rng);
    let value = Mlp::random(&[OBS_DIM, 64, 64, 1], 1.0, &mut rng).expect("valid sizes");
    Checkpoint {
        policy,
        value,
        iteration: 0,
    }
}

/// Nominal lane-keeping environment for training and evaluation.
pub fn lane_keeping_env(road: Arc<Road>, scenario: &ScenarioConfig, params: &VehicleParams) -> Result<Env> {
    Env::new(
        road,
        Arc::new(scenario.clone()),
        Task::Lk,
        params.clone(),
        SideForce::NONE,
    )
}

/// Runs `episodes` deterministic lane-keeping episodes from seeded random
/// initial conditions.
pub fn evaluate_policy(policy: &GaussianPolicy, template: &Env, episodes: usize, seed: u64) -> Result<Vec<EpisodeStats>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = template.config().start_lane;
    let gamma: f64 = 0.99;
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut env = template.clone();
        env.reset(&mut rng)?;
        let mut stats = EpisodeStats {
            length: 0,
            discounted_return: 0.0,
            undiscounted_return: 0.0,
            cause: TerminationCause::Running,
        };
        loop {
            let obs = env.observation().tracking_input(lane)?;
            let a = policy.act_deterministic(&obs)?;
            let outcome = env.step(policy.to_vehicle_action(&a), lane)?;
            stats.discounted_return += gamma.powi(stats.length as i32) * outcome.reward;
            stats.undiscounted_return += outcome.reward;
            stats.length += 1;
            if outcome.terminated {
                stats.cause = outcome.cause;
                break;
            }
        }
        out.push(stats);
    }
    Ok(out)
}

/// Trains until `cfg.max_iterations` total iterations, or until the
/// evaluation streak completes when `cfg.stop_on_success` is set. Starts
/// from `resume` when given, continuing its iteration count. Each log row is
/// also passed to `on_log`.
pub fn train_lane_tracking(
    params: &VehicleParams,
    scenario: &ScenarioConfig,
    cfg: &PpoConfig,
    resume: Option<Checkpoint>,
    mut on_log: impl FnMut(&LogRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let scenario = ScenarioConfig {
        eta: cfg.eta,
        ..scenario.clone()
    };
    scenario.validate()?;
    let road = Arc::new(Road::sinusoidal(&scenario.lanes)?);
    let template = lane_keeping_env(road, &scenario, params)?;

    let mut ckpt = resume.unwrap_or_else(|| initial_checkpoint(params, cfg));
    let start = ckpt.iteration;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ start.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut collector = Collector::new(template.clone(), cfg.gamma, &mut rng)?;
    let mut opt = PpoOptimizer::new(&ckpt.policy, &ckpt.value, cfg.learning_rate);

    let mut log = Vec::new();
    let mut window_eps: Vec<EpisodeStats> = Vec::new();
    let mut window_loss = LossParts::default();
    let mut window_updates = 0.0;
    let mut streak = 0;
    let mut success_iteration = None;

    for it in start + 1..=cfg.max_iterations {
        let mut buf = collector.collect(&ckpt.policy, &ckpt.value, cfg.batch_size, &mut rng, &mut window_eps)?;
        buf.compute_advantages(cfg.gamma, cfg.gae_lambda, cfg.reward_scale);
        if cfg.normalize_advantages {
            buf.normalize_advantages();
        }
        let parts = ppo_update(&mut ckpt.policy, &mut ckpt.value, &buf, cfg, &mut opt, it)?;
        ckpt.iteration = it;
        window_loss.policy_loss += parts.policy_loss;
        window_loss.value_loss += parts.value_loss;
        window_loss.clip_fraction += parts.clip_fraction;
        window_updates += 1.0;

        if it % cfg.log_every == 0 {
            let (ret, len) = if window_eps.is_empty() {
                (f64::NAN, collector.running_length() as f64)
            } else {
                let n = window_eps.len() as f64;
                (
                    window_eps.iter().map(|e| e.discounted_return).sum::<f64>() / n,
                    window_eps.iter().map(|e| e.length as f64).sum::<f64>() / n,
                )
            };
            let row = LogRow {
                iteration: it,
                mean_discounted_return: ret,
                mean_episode_length: len,
                policy_loss: window_loss.policy_loss / window_updates,
                value_loss: window_loss.value_loss / window_updates,
                clip_fraction: window_loss.clip_fraction / window_updates,
            };
            on_log(&row);
            log.push(row);
            window_eps.clear();
            window_loss = LossParts::default();
            window_updates = 0.0;

            if cfg.eval_episodes > 0 {
                let eval = evaluate_policy(&ckpt.policy, &template, cfg.eval_episodes, cfg.seed.wrapping_add(it))?;
                if eval.iter().all(|e| e.cause == TerminationCause::Horizon) {
                    streak += 1;
                } else {
                    streak = 0;
                }
                if streak >= cfg.success_streak.max(1) && success_iteration.is_none() {
                    success_iteration = Some(it);
                    if cfg.stop_on_success {
                        break;
                    }
                }
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: ckpt,
        log,
        success_iteration,
    })
}
