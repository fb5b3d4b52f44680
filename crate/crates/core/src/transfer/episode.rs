//! Single episodes on a target vehicle: the source policy applied directly,
//! and the planner plus robust tracking controller.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::design::build_controller;
use crate::control::dob::{ControllerConfig, DobController};
use crate::dynamics::{VehicleAction, VehicleParams};
use crate::error::Result;
use crate::policy::{DetectorConfig, GaussianPolicy, HierarchicalAssembly, Planner, ReferenceTrajectory};
use crate::scenario::{tracking_errors, Env, Path, Road, ScenarioConfig, TerminationCause, TraceRow};

pub const EVAL_GAMMA: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub length: usize,
    pub cause: TerminationCause,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlrcConfig {
    pub controller: ControllerConfig,
    /// Imaginary rollout length, steps.
    pub planning_horizon: usize,
    /// Steps between replans; the reference is reused in between.
    pub replan_every: usize,
    pub detector: DetectorConfig,
}

impl Default for RlrcConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            planning_horizon: 50,
            replan_every: 1,
            detector: DetectorConfig::default(),
        }
    }
}

struct Accumulator {
    result: EpisodeResult,
}

impl Accumulator {
    fn new(record: bool) -> Self {
        Self {
            result: EpisodeResult {
                discounted_return: 0.0,
                undiscounted_return: 0.0,
                length: 0,
                cause: TerminationCause::Running,
                trace: record.then(Vec::new),
            },
        }
    }

    fn push(&mut self, env: &Env, lane: usize, reward: f64) {
        let r = &mut self.result;
        r.discounted_return += EVAL_GAMMA.powi(r.length as i32) * reward;
        r.undiscounted_return += reward;
        r.length += 1;
        if let Some(trace) = &mut r.trace {
            let errors = env.observation().lanes.get(lane).copied().unwrap_or_default();
            trace.push(TraceRow::new(env.time_step() as f64 * env.dt(), env.state(), &errors, reward));
        }
    }
}

/// Source policy and rule modules acting directly on the target plant. `env`
/// must already be reset.
pub fn run_baseline(env: &mut Env, policy: Arc<GaussianPolicy>, detector: DetectorConfig, record: bool) -> Result<EpisodeResult> {
    let mut agent = HierarchicalAssembly::new(policy, env.task(), env.config().start_lane, detector);
    let mut acc = Accumulator::new(record);
    loop {
        let (a, lane) = agent.act(env.observation())?;
        let outcome = env.step(agent.policy().to_vehicle_action(&a), lane)?;
        acc.push(env, lane, outcome.reward);
        if outcome.terminated {
            acc.result.cause = outcome.cause;
            return Ok(acc.result);
        }
    }
}

/// Planner and tracking controller built from the nominal vehicle only.
#[derive(Debug, Clone)]
pub struct RlrcAgent {
    pub assembly: HierarchicalAssembly,
    pub planner: Planner,
    pub controller: DobController,
    pub cfg: RlrcConfig,
    look_ahead: f64,
    speed_gain: f64,
}

impl RlrcAgent {
    pub fn new(
        policy: Arc<GaussianPolicy>,
        road: Arc<Road>,
        scenario: Arc<ScenarioConfig>,
        task: crate::scenario::Task,
        nominal: &VehicleParams,
        cfg: RlrcConfig,
    ) -> Result<Self> {
        let assembly = HierarchicalAssembly::new(policy, task, scenario.start_lane, cfg.detector);
        let look_ahead = scenario.look_ahead;
        let planner = Planner::new(road, scenario, nominal.clone(), cfg.planning_horizon)?;
        let controller_cfg = ControllerConfig {
            look_ahead,
            ..cfg.controller.clone()
        };
        let controller = build_controller(nominal, &controller_cfg)?;
        Ok(Self {
            assembly,
            planner,
            controller,
            speed_gain: cfg.controller.speed_gain,
            cfg,
            look_ahead,
        })
    }

    pub fn reset(&mut self) {
        self.assembly.reset();
        self.controller.reset();
    }

    /// Runs one episode on the target plant in `env`, which must already be
    /// reset. The agent is reset first.
    pub fn run(&mut self, env: &mut Env, record: bool) -> Result<EpisodeResult> {
        self.reset();
        let mut acc = Accumulator::new(record);
        let mut plan: Option<(ReferenceTrajectory, Path)> = None;
        let mut since_plan = 0usize;
        let dt = env.dt();
        let replan_every = self.cfg.replan_every.max(1);
        loop {
            self.assembly.decide(env.observation())?;
            let lane = self.assembly.target_lane();
            if plan.is_none() || since_plan >= replan_every {
                let snap = env.snapshot(env.observation().nearest_lane())?;
                let traj = self.planner.plan(&self.assembly, &snap)?;
                let path = traj.path()?;
                plan = Some((traj, path));
                since_plan = 0;
            }
            let (traj, path) = plan.as_ref().unwrap();
            let errors = tracking_errors(env.state(), path, self.look_ahead)?;
            let delta_cmd = self.controller.step(errors.dy_s, errors.dpsi_s);

            let state = env.state();
            let k = since_plan.min(traj.samples.len() - 1);
            let ax_plan = traj.actions.get(k).map(|a| a.ax).unwrap_or(0.0);
            let vx_ref = traj.samples[k].vx;
            let action = VehicleAction {
                ax: ax_plan + self.speed_gain * (vx_ref - state.vx),
                ddelta: (delta_cmd - state.delta) / dt,
            };
            let outcome = env.step(action, lane)?;
            self.controller.record_applied(env.state().delta);
            since_plan += 1;
            acc.push(env, lane, outcome.reward);
            if outcome.terminated {
                acc.result.cause = outcome.cause;
                return Ok(acc.result);
            }
        }
    }
}
