//! Reference generation by rolling the hierarchical policy forward on an
//! imaginary copy of the episode that uses the nominal vehicle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleAction, VehicleParams};
use crate::error::{Error, Result};
use crate::policy::hierarchy::HierarchicalAssembly;
use crate::scenario::{Env, Path, PlanningSnapshot, Road, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Velocity direction.
    pub psi_v: f64,
    pub vx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub samples: Vec<ReferenceSample>,
    /// Normalized-to-physical actions the imaginary agent applied after
    /// each sample; one fewer than the samples unless the rollout ended early.
    pub actions: Vec<VehicleAction>,
    pub horizon: usize,
    pub dt: f64,
}

impl ReferenceTrajectory {
    /// Polyline through the samples with `psi_v` as tangent heading. A
    /// single-sample trajectory is extended one step along its heading.
    pub fn path(&self) -> Result<Path> {
        let mut pts: Vec<[f64; 2]> = self.samples.iter().map(|s| [s.x, s.y]).collect();
        let mut hs: Vec<f64> = self.samples.iter().map(|s| s.psi_v).collect();
        if let [only] = self.samples.as_slice() {
            let step = only.vx.max(1.0) * self.dt;
            pts.push([only.x + step * only.psi_v.cos(), only.y + step * only.psi_v.sin()]);
            hs.push(only.psi_v);
        }
        Path::new(&pts, Some(&hs), None)
    }

    /// Planned longitudinal acceleration at the first sample.
    pub fn first_ax(&self) -> f64 {
        self.actions.first().map(|a| a.ax).unwrap_or(0.0)
    }
}

/// Builds references from lane-relative snapshots. Holds only the nominal
/// vehicle, so no target parameter can reach the rollout.
#[derive(Debug, Clone)]
pub struct Planner {
    road: Arc<Road>,
    cfg: Arc<ScenarioConfig>,
    nominal: VehicleParams,
    pub horizon: usize,
}

impl Planner {
    pub fn new(road: Arc<Road>, cfg: Arc<ScenarioConfig>, nominal: VehicleParams, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        nominal.validate()?;
        Ok(Self {
            road,
            cfg,
            nominal,
            horizon,
        })
    }

    pub fn nominal(&self) -> &VehicleParams {
        &self.nominal
    }

    /// Rolls a copy of `assembly` deterministically for `horizon` samples.
    /// The rollout stops early if the imaginary episode terminates.
    pub fn plan(&self, assembly: &HierarchicalAssembly, snap: &PlanningSnapshot) -> Result<ReferenceTrajectory> {
        let mut env = Env::imaginary(
            self.road.clone(),
            self.cfg.clone(),
            assembly.task(),
            self.nominal.clone(),
            snap,
        )?;
        let mut agent = assembly.clone();
        let dt = self.nominal.dt;
        let t0 = snap.t as f64 * dt;
        let mut samples = Vec::with_capacity(self.horizon);
        let mut actions = Vec::with_capacity(self.horizon);
        for k in 0..self.horizon {
            let st = env.state();
            samples.push(ReferenceSample {
                t: t0 + k as f64 * dt,
                x: st.x,
                y: st.y,
                psi_v: st.course(),
                vx: st.vx,
            });
            if k + 1 == self.horizon {
                break;
            }
            let (a, lane) = agent.act(env.observation())?;
            let action = agent.policy().to_vehicle_action(&a);
            actions.push(action);
            if env.step(action, lane)?.terminated {
                break;
            }
        }
        Ok(ReferenceTrajectory {
            samples,
            actions,
            horizon: self.horizon,
            dt,
        })
    }
}
