//! Rule-based lane selection and obstacle detection wired around the learned
//! lane-tracking policy.
//!
//! Wiring per task: LK feeds the start lane straight to tracking; LC selects
//! the commanded lane; OA runs detection, then selection, then tracking.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::gaussian::{GaussianPolicy, OBS_DIM};
use crate::scenario::{neighbour_lane, Observation, Task};

/// Tracking input `[o_vh, o_ref,i*]` for the selected lane.
pub fn lane_selection(obs: &Observation, i_star: usize) -> Result<[f64; OBS_DIM]> {
    obs.tracking_input(i_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Smallest trigger distance, m.
    pub min_trigger: f64,
    /// Time headway applied to the closing speed, s.
    pub headway: f64,
    pub closing_factor: f64,
    /// Distance past the obstacle before returning to the original lane, m.
    pub pass_margin: f64,
    pub lane_width: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_trigger: 20.0,
            headway: 3.0,
            closing_factor: 2.0,
            pass_margin: 10.0,
            lane_width: 3.0,
        }
    }
}

impl DetectorConfig {
    /// `max(min_trigger, closing_factor (vx - v_srd) headway)`.
    pub fn trigger_distance(&self, vx: f64, v_srd: f64) -> f64 {
        self.min_trigger.max(self.closing_factor * (vx - v_srd) * self.headway)
    }
}

/// Switches to the adjacent lane when an obstacle ahead in the current lane
/// enters the trigger zone; returns once it is `pass_margin` behind.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObstacleDetector {
    pub cfg: DetectorConfig,
    /// Lane left for the overtake, while one is in progress.
    home: Option<usize>,
}

impl ObstacleDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self { cfg, home: None }
    }

    pub fn reset(&mut self) {
        self.home = None;
    }

    pub fn overtaking(&self) -> bool {
        self.home.is_some()
    }

    pub fn update(&mut self, obs: &Observation, current: usize) -> usize {
        let Some(srd) = obs.surrounding else {
            return current;
        };
        if let Some(home) = self.home {
            if srd.dx_srd < -self.cfg.pass_margin {
                self.home = None;
                return home;
            }
            return current;
        }
        let Some(lane) = obs.lanes.get(current) else {
            return current;
        };
        // Obstacle offset from the centre of the current lane.
        let same_lane = (srd.dy_srd + lane.dy).abs() < 0.5 * self.cfg.lane_width;
        let trigger = self.cfg.trigger_distance(obs.ego.vx, srd.v_srd);
        if same_lane && srd.dx_srd > 0.0 && srd.dx_srd < trigger {
            self.home = Some(current);
            return neighbour_lane(current, obs.lanes.len());
        }
        current
    }
}

#[derive(Debug, Clone)]
pub struct HierarchicalAssembly {
    policy: Arc<GaussianPolicy>,
    task: Task,
    start_lane: usize,
    i_star: usize,
    detector: ObstacleDetector,
    selection_calls: usize,
    detection_calls: usize,
}

impl HierarchicalAssembly {
    pub fn new(policy: Arc<GaussianPolicy>, task: Task, start_lane: usize, detector: DetectorConfig) -> Self {
        Self {
            policy,
            task,
            start_lane,
            i_star: start_lane,
            detector: ObstacleDetector::new(detector),
            selection_calls: 0,
            detection_calls: 0,
        }
    }

    pub fn policy(&self) -> &Arc<GaussianPolicy> {
        &self.policy
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Current target lane `i*`.
    pub fn target_lane(&self) -> usize {
        self.i_star
    }

    pub fn selection_calls(&self) -> usize {
        self.selection_calls
    }

    pub fn detection_calls(&self) -> usize {
        self.detection_calls
    }

    pub fn reset(&mut self) {
        self.i_star = self.start_lane;
        self.detector.reset();
        self.selection_calls = 0;
        self.detection_calls = 0;
    }

    /// Updates `i*` and returns the lane-tracking input.
    pub fn decide(&mut self, obs: &Observation) -> Result<[f64; OBS_DIM]> {
        match self.task {
            Task::Lk => obs.tracking_input(self.i_star),
            Task::Lc => {
                if let Some(lane) = obs.commanded_lane {
                    self.i_star = lane;
                }
                self.selection_calls += 1;
                lane_selection(obs, self.i_star)
            }
            Task::Oa => {
                self.detection_calls += 1;
                self.i_star = self.detector.update(obs, self.i_star);
                self.selection_calls += 1;
                lane_selection(obs, self.i_star)
            }
        }
    }

    /// Deterministic normalized action and the target lane it tracks.
    pub fn act(&mut self, obs: &Observation) -> Result<(Vec<f64>, usize)> {
        let input = self.decide(obs)?;
        Ok((self.policy.act_deterministic(&input)?, self.i_star))
    }
}
