//! Driving-task MDP: sinusoidal lanes, tracking-error geometry, the
//! surrounding vehicle, observations, reward, and termination for lane
//! keeping (LK), lane changing (LC), and obstacle avoidance (OA).

pub mod path;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, SideForce, VehicleAction, VehicleParams, VehicleState, VX_FLOOR};
use crate::error::{Error, Result};
pub use path::{wrap_angle, CurvePoint, Path, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Lk,
    Lc,
    Oa,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Lk, Task::Lc, Task::Oa];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Lk => "lk",
            Task::Lc => "lc",
            Task::Oa => "oa",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lk" => Ok(Task::Lk),
            "lc" => Ok(Task::Lc),
            "oa" => Ok(Task::Oa),
            other => Err(Error::invalid("task", format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationCause {
    Running,
    Deviation,
    Collision,
    Horizon,
}

impl fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationCause::Running => "running",
            TerminationCause::Deviation => "deviation",
            TerminationCause::Collision => "collision",
            TerminationCause::Horizon => "horizon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneConfig {
    pub count: usize,
    pub width: f64,
    pub amplitude: f64,
    /// Spatial angular frequency, rad/m.
    pub frequency: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub spacing: f64,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            count: 2,
            width: 3.0,
            amplitude: 3.0,
            frequency: 0.02,
            x_start: -100.0,
            x_end: 900.0,
            spacing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitRanges {
    pub dy: [f64; 2],
    pub dpsi: [f64; 2],
    pub vx: [f64; 2],
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            dy: [-1.0, 1.0],
            dpsi: [-0.1, 0.1],
            vx: [15.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurroundingConfig {
    pub speed: f64,
    /// Initial arc-length lead over the ego vehicle, m.
    pub gap: f64,
    pub lane: usize,
}

impl Default for SurroundingConfig {
    fn default() -> Self {
        Self {
            speed: 10.0,
            gap: 80.0,
            lane: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub lanes: LaneConfig,
    /// Look-ahead distance d_s, m.
    pub look_ahead: f64,
    /// Lateral-error weight in the tracking reward.
    pub eta: f64,
    pub horizon: usize,
    /// Speed held by the low-level longitudinal controller, m/s.
    pub speed_limit: f64,
    pub deviation_threshold: f64,
    pub deviation_penalty: f64,
    pub collision_penalty: f64,
    pub init: InitRanges,
    pub start_lane: usize,
    /// LC: steps at which the commanded lane toggles to the neighbour and back.
    pub lane_change_steps: Vec<usize>,
    pub surrounding: SurroundingConfig,
    /// Collision box (length, width) of both vehicles, m.
    pub collision_box: [f64; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lanes: LaneConfig::default(),
            look_ahead: 15.0,
            eta: 20.0,
            horizon: 1000,
            speed_limit: 20.0,
            deviation_threshold: 3.0,
            deviation_penalty: -1000.0,
            collision_penalty: -1000.0,
            init: InitRanges::default(),
            start_lane: 0,
            lane_change_steps: vec![250, 650],
            surrounding: SurroundingConfig::default(),
            collision_box: [4.7, 1.8],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.look_ahead > 0.0) {
            return Err(Error::invalid("look_ahead", "must be > 0"));
        }
        if self.lanes.count == 0 {
            return Err(Error::invalid("lanes.count", "need at least one lane"));
        }
        if !(self.lanes.width > 0.0) {
            return Err(Error::invalid("lanes.width", "must be > 0"));
        }
        if self.start_lane >= self.lanes.count {
            return Err(Error::invalid("start_lane", "must index an existing lane"));
        }
        if self.surrounding.lane >= self.lanes.count {
            return Err(Error::invalid("surrounding.lane", "must index an existing lane"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be > 0"));
        }
        if !(self.deviation_threshold > 0.0) {
            return Err(Error::invalid("deviation_threshold", "must be > 0"));
        }
        if !(self.init.vx[0] > VX_FLOOR && self.init.vx[1] >= self.init.vx[0]) {
            return Err(Error::invalid("init.vx", "range must be ordered and above the speed floor"));
        }
        if !(self.speed_limit > VX_FLOOR) {
            return Err(Error::invalid("speed_limit", "must exceed the speed floor"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: usize,
    pub offset: f64,
    pub width: f64,
    pub path: Path,
}

/// The set of parallel lanes shared by every environment instance.
#[derive(Debug, Clone)]
pub struct Road {
    pub lanes: Vec<Lane>,
}

impl Road {
    /// Parallel sinusoids `Y = A sin(w X) + i * width`.
    pub fn sinusoidal(cfg: &LaneConfig) -> Result<Self> {
        let (amp, w) = (cfg.amplitude, cfg.frequency);
        let lanes = (0..cfg.count)
            .map(|id| {
                let offset = id as f64 * cfg.width;
                let path = Path::from_graph(
                    cfg.x_start,
                    cfg.x_end,
                    cfg.spacing,
                    |x| amp * (w * x).sin() + offset,
                    |x| amp * w * (w * x).cos(),
                    |x| -amp * w * w * (w * x).sin(),
                )?;
                Ok(Lane {
                    id,
                    offset,
                    width: cfg.width,
                    path,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lanes })
    }

    pub fn lane(&self, i: usize) -> Result<&Lane> {
        self.lanes.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.lanes.len(),
        })
    }
}

/// Errors of the vehicle relative to a curve, at the CG and at the
/// look-ahead point S.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingErrors {
    pub dy: f64,
    pub dpsi: f64,
    pub dy_s: f64,
    pub dpsi_s: f64,
    pub kappa_s_ref: f64,
    /// Arc length of the CG projection.
    pub s: f64,
}

impl TrackingErrors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.dy, self.dpsi, self.dy_s, self.dpsi_s]
    }
}

/// Tracking errors of `state` against `curve` with look-ahead `d_s`.
///
/// S on the curve sits `d_s` of arc length past the CG projection; on the
/// vehicle it is the body point `d_s` ahead of the CG along the heading,
/// whose velocity direction is `psi + atan((vy + d_s wz) / vx)`.
pub fn tracking_errors(state: &VehicleState, curve: &Path, d_s: f64) -> Result<TrackingErrors> {
    let proj = curve.project(state.x, state.y)?;
    let dpsi = wrap_angle(state.course() - proj.foot.heading);

    let (sin_psi, cos_psi) = state.psi.sin_cos();
    let (sx, sy) = (state.x + d_s * cos_psi, state.y + d_s * sin_psi);
    let r = curve.point_at(proj.s + d_s);
    let (sin_h, cos_h) = r.heading.sin_cos();
    let dy_s = cos_h * (sy - r.y) - sin_h * (sx - r.x);
    let course_s = state.psi + (state.vy + d_s * state.wz).atan2(state.vx);
    let dpsi_s = wrap_angle(course_s - r.heading);

    Ok(TrackingErrors {
        dy: proj.lateral,
        dpsi,
        dy_s,
        dpsi_s,
        kappa_s_ref: r.curvature,
        s: proj.s,
    })
}

/// Tracking reward: speed along the curve minus speed across it minus the
/// weighted squared lateral error.
pub fn step_reward(errors: &TrackingErrors, speed: f64, eta: f64) -> f64 {
    let (sin_d, cos_d) = errors.dpsi.sin_cos();
    speed * cos_d - (speed * sin_d).abs() - eta * errors.dy * errors.dy
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoObservation {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    pub delta: f64,
}

impl EgoObservation {
    pub fn of(state: &VehicleState) -> Self {
        Self {
            vx: state.vx,
            vy: state.vy,
            wz: state.wz,
            delta: state.delta,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.vx, self.vy, self.wz, self.delta]
    }
}

/// Surrounding vehicle relative to the ego, in the coordinates of the
/// surrounding vehicle's lane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SurroundingObservation {
    pub v_srd: f64,
    pub dx_srd: f64,
    pub dy_srd: f64,
}

/// A vehicle that follows its lane centerline at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurroundingVehicle {
    pub lane: usize,
    pub s: f64,
    pub speed: f64,
}

impl SurroundingVehicle {
    pub fn pose(&self, road: &Road) -> Result<CurvePoint> {
        Ok(road.lane(self.lane)?.path.point_at(self.s))
    }
}

/// Advances a surrounding vehicle by `speed * dt` of arc length.
pub fn surrounding_step(srd: &SurroundingVehicle, dt: f64) -> SurroundingVehicle {
    SurroundingVehicle {
        s: srd.s + srd.speed * dt,
        ..*srd
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub ego: EgoObservation,
    /// Tracking errors against every lane, indexed by lane id.
    pub lanes: Vec<TrackingErrors>,
    /// LC: the externally commanded lane.
    pub commanded_lane: Option<usize>,
    /// OA: the surrounding vehicle.
    pub surrounding: Option<SurroundingObservation>,
}

impl Observation {
    /// Lane-tracking input `[o_vh, o_ref,i]`.
    pub fn tracking_input(&self, lane: usize) -> Result<[f64; 8]> {
        let e = self.lanes.get(lane).ok_or(Error::IndexOutOfRange {
            index: lane,
            len: self.lanes.len(),
        })?;
        let [vx, vy, wz, d] = self.ego.as_array();
        let [dy, dpsi, dys, dpsis] = e.as_array();
        Ok([vx, vy, wz, d, dy, dpsi, dys, dpsis])
    }

    /// Index of the lane whose centerline is closest to the CG.
    pub fn nearest_lane(&self) -> usize {
        self.lanes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.dy.abs().total_cmp(&b.1.dy.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminated: bool,
    pub cause: TerminationCause,
}

/// Everything an imaginary copy of the episode needs, expressed relative to
/// the lanes. Deliberately excludes the plant parameters and side force.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSnapshot {
    pub ego: EgoObservation,
    /// Lane used to express the pose.
    pub lane: usize,
    pub s: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub surrounding: Option<SurroundingVehicle>,
    pub t: usize,
}

/// One driving episode on a given plant.
#[derive(Debug, Clone)]
pub struct Env {
    road: Arc<Road>,
    cfg: Arc<ScenarioConfig>,
    task: Task,
    params: VehicleParams,
    side_force: SideForce,
    state: VehicleState,
    srd: Option<SurroundingVehicle>,
    t: usize,
    enforce_horizon: bool,
    obs: Observation,
}

impl Env {
    pub fn new(
        road: Arc<Road>,
        cfg: Arc<ScenarioConfig>,
        task: Task,
        params: VehicleParams,
        side_force: SideForce,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if road.lanes.is_empty() {
            return Err(Error::invalid("lanes.count", "road has no lanes"));
        }
        let state = VehicleState::straight(cfg.init.vx[1]);
        let mut env = Self {
            road,
            cfg,
            task,
            params,
            side_force,
            state,
            srd: None,
            t: 0,
            enforce_horizon: true,
            obs: Observation {
                ego: EgoObservation::default(),
                lanes: Vec::new(),
                commanded_lane: None,
                surrounding: None,
            },
        };
        env.reset_to_offsets(0.0, 0.0, env.cfg.init.vx[1])?;
        Ok(env)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn road(&self) -> &Arc<Road> {
        &self.road
    }

    pub fn config(&self) -> &Arc<ScenarioConfig> {
        &self.cfg
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn surrounding(&self) -> Option<&SurroundingVehicle> {
        self.srd.as_ref()
    }

    pub fn time_step(&self) -> usize {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    /// Randomized initial condition on the start lane near X = 0.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<&Observation> {
        let init = self.cfg.init;
        let dy = uniform(rng, init.dy);
        let dpsi = uniform(rng, init.dpsi);
        let vx = uniform(rng, init.vx);
        self.reset_to_offsets(dy, dpsi, vx)?;
        Ok(&self.obs)
    }

    /// Starts on the start lane near X = 0 with the given lane offset,
    /// heading error, and speed; other states zero.
    pub fn reset_to_offsets(&mut self, dy: f64, dpsi: f64, vx: f64) -> Result<&Observation> {
        let lane = self.road.lane(self.cfg.start_lane)?;
        let s0 = lane.path.project(0.0, lane.offset)?.s;
        let pose = pose_on_lane(lane, s0, dy, dpsi, vx, 0.0);
        self.t = 0;
        self.state = VehicleState {
            vx,
            x: pose.0,
            y: pose.1,
            psi: pose.2,
            ..Default::default()
        };
        self.srd = match self.task {
            Task::Oa => Some(SurroundingVehicle {
                lane: self.cfg.surrounding.lane,
                s: s0 + self.cfg.surrounding.gap,
                speed: self.cfg.surrounding.speed,
            }),
            _ => None,
        };
        self.obs = self.observe()?;
        Ok(&self.obs)
    }

    /// Imaginary copy of an episode on the given (nominal) plant, built from
    /// a lane-relative snapshot. The horizon is not enforced so a preview can
    /// run past the end of the real episode.
    pub fn imaginary(
        road: Arc<Road>,
        cfg: Arc<ScenarioConfig>,
        task: Task,
        params: VehicleParams,
        snap: &PlanningSnapshot,
    ) -> Result<Self> {
        let lane = road.lane(snap.lane)?;
        let (x, y, psi) = pose_on_lane(lane, snap.s, snap.dy, snap.dpsi, snap.ego.vx, snap.ego.vy);
        let state = VehicleState {
            vx: snap.ego.vx,
            vy: snap.ego.vy,
            wz: snap.ego.wz,
            x,
            y,
            psi,
            delta: snap.ego.delta,
        };
        let mut env = Self {
            road,
            cfg,
            task,
            params,
            side_force: SideForce::NONE,
            state,
            srd: snap.surrounding,
            t: snap.t,
            enforce_horizon: false,
            obs: Observation {
                ego: EgoObservation::default(),
                lanes: Vec::new(),
                commanded_lane: None,
                surrounding: None,
            },
        };
        env.obs = env.observe()?;
        Ok(env)
    }

    /// Lane-relative snapshot of the current episode state.
    pub fn snapshot(&self, lane: usize) -> Result<PlanningSnapshot> {
        let e = self.obs.lanes.get(lane).ok_or(Error::IndexOutOfRange {
            index: lane,
            len: self.obs.lanes.len(),
        })?;
        Ok(PlanningSnapshot {
            ego: self.obs.ego,
            lane,
            s: e.s,
            dy: e.dy,
            dpsi: e.dpsi,
            surrounding: self.srd,
            t: self.t,
        })
    }

    /// Overrides the plant state. Used by tests and trace replays.
    pub fn set_state(&mut self, state: VehicleState) -> Result<&Observation> {
        self.state = state;
        self.obs = self.observe()?;
        Ok(&self.obs)
    }

    pub fn commanded_lane(&self, t: usize) -> usize {
        let start = self.cfg.start_lane;
        let toggles = self.cfg.lane_change_steps.iter().filter(|&&k| k <= t).count();
        if toggles % 2 == 0 {
            start
        } else {
            neighbour_lane(start, self.road.lanes.len())
        }
    }

    fn observe(&self) -> Result<Observation> {
        let lanes = self
            .road
            .lanes
            .iter()
            .map(|l| tracking_errors(&self.state, &l.path, self.cfg.look_ahead))
            .collect::<Result<Vec<_>>>()?;
        let surrounding = match &self.srd {
            Some(srd) => Some(self.surrounding_observation(srd)?),
            None => None,
        };
        Ok(Observation {
            ego: EgoObservation::of(&self.state),
            lanes,
            commanded_lane: (self.task == Task::Lc).then(|| self.commanded_lane(self.t)),
            surrounding,
        })
    }

    fn surrounding_observation(&self, srd: &SurroundingVehicle) -> Result<SurroundingObservation> {
        let proj = self.road.lane(srd.lane)?.path.project(self.state.x, self.state.y)?;
        Ok(SurroundingObservation {
            v_srd: srd.speed,
            dx_srd: srd.s - proj.s,
            dy_srd: -proj.lateral,
        })
    }

    /// Advances the episode one step. `target_lane` is the lane the agent is
    /// tracking; the tracking reward is measured against it.
    pub fn step(&mut self, action: VehicleAction, target_lane: usize) -> Result<StepOutcome> {
        if target_lane >= self.road.lanes.len() {
            return Err(Error::IndexOutOfRange {
                index: target_lane,
                len: self.road.lanes.len(),
            });
        }
        let mut action = action.clamped(&self.params);
        // Low-level longitudinal control holds the speed limit.
        action.ax = action
            .ax
            .min((self.cfg.speed_limit - self.state.vx) / self.params.dt)
            .max(-self.params.ax_max);
        self.state = dynamics::step(&self.state, &action, &self.params, &self.side_force)?;
        if let Some(srd) = &mut self.srd {
            *srd = surrounding_step(srd, self.params.dt);
        }
        self.t += 1;

        let stalled = self.state.vx <= VX_FLOOR || !self.state.is_finite();
        let obs = if stalled { None } else { self.observe().ok() };
        let (reward, cause) = match obs {
            None => (self.cfg.deviation_penalty, TerminationCause::Deviation),
            Some(obs) => {
                let tracked = &obs.lanes[target_lane];
                let mut reward = step_reward(tracked, self.state.speed(), self.cfg.eta);
                let cause = if self.collided(&obs) {
                    reward += self.cfg.collision_penalty;
                    TerminationCause::Collision
                } else if self.deviated(&obs, target_lane) {
                    reward += self.cfg.deviation_penalty;
                    TerminationCause::Deviation
                } else if self.enforce_horizon && self.t >= self.cfg.horizon {
                    TerminationCause::Horizon
                } else {
                    TerminationCause::Running
                };
                self.obs = obs;
                (reward, cause)
            }
        };
        Ok(StepOutcome {
            reward,
            terminated: cause != TerminationCause::Running,
            cause,
        })
    }

    fn deviated(&self, obs: &Observation, target_lane: usize) -> bool {
        let dy = match self.task {
            Task::Lk => obs.lanes[target_lane].dy,
            Task::Lc | Task::Oa => obs.lanes[obs.nearest_lane()].dy,
        };
        dy.abs() > self.cfg.deviation_threshold
    }

    fn collided(&self, obs: &Observation) -> bool {
        match obs.surrounding {
            Some(o) => {
                let [len, wid] = self.cfg.collision_box;
                o.dx_srd.abs() < len && o.dy_srd.abs() < wid
            }
            None => false,
        }
    }
}

/// Adjacent lane index: the next lane up, or the one below for the top lane.
pub fn neighbour_lane(lane: usize, count: usize) -> usize {
    if lane + 1 < count {
        lane + 1
    } else {
        lane.saturating_sub(1)
    }
}

/// Global pose `(X, Y, psi)` at lane arc length `s` with lateral offset `dy`
/// and course error `dpsi` for a vehicle moving at `(vx, vy)`.
pub fn pose_on_lane(lane: &Lane, s: f64, dy: f64, dpsi: f64, vx: f64, vy: f64) -> (f64, f64, f64) {
    let foot = lane.path.point_at(s);
    let [nx, ny] = lane.path.normal_at(s);
    let course = foot.heading + dpsi;
    (foot.x + dy * nx, foot.y + dy * ny, course - vy.atan2(vx))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

/// One row of an exported episode trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    pub delta: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub reward: f64,
}

impl TraceRow {
    pub const HEADER: [&'static str; 11] = [
        "t_s", "x_m", "y_m", "psi_rad", "vx_mps", "vy_mps", "wz_radps", "delta_rad", "dy_m",
        "dpsi_rad", "reward",
    ];

    pub fn new(t: f64, state: &VehicleState, errors: &TrackingErrors, reward: f64) -> Self {
        Self {
            t,
            x: state.x,
            y: state.y,
            psi: state.psi,
            vx: state.vx,
            vy: state.vy,
            wz: state.wz,
            delta: state.delta,
            dy: errors.dy,
            dpsi: errors.dpsi,
            reward,
        }
    }

    pub fn values(&self) -> [f64; 11] {
        [
            self.t, self.x, self.y, self.psi, self.vx, self.vy, self.wz, self.delta, self.dy,
            self.dpsi, self.reward,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn straight_path() -> Path {
        Path::from_graph(-50.0, 500.0, 0.5, |_| 0.0, |_| 0.0, |_| 0.0).unwrap()
    }

    fn straight_road_cfg() -> ScenarioConfig {
        ScenarioConfig {
            lanes: LaneConfig {
                amplitude: 0.0,
                ..LaneConfig::default()
            },
            ..ScenarioConfig::default()
        }
    }

    fn env(task: Task, cfg: ScenarioConfig) -> Env {
        let road = Arc::new(Road::sinusoidal(&cfg.lanes).unwrap());
        Env::new(road, Arc::new(cfg), task, VehicleParams::nominal(), SideForce::NONE).unwrap()
    }

    #[test]
    fn aligned_vehicle_has_zero_errors() {
        let p = straight_path();
        let s = VehicleState {
            x: 10.0,
            ..VehicleState::straight(20.0)
        };
        let e = tracking_errors(&s, &p, 15.0).unwrap();
        assert_eq!([e.dy, e.dpsi, e.dy_s, e.dpsi_s, e.kappa_s_ref], [0.0; 5]);
    }

    #[test]
    fn parallel_offset() {
        let p = straight_path();
        let s = VehicleState {
            x: 10.0,
            y: 1.0,
            ..VehicleState::straight(20.0)
        };
        let e = tracking_errors(&s, &p, 15.0).unwrap();
        assert!((e.dy - 1.0).abs() < 1e-12);
        assert_eq!(e.dpsi, 0.0);
        assert!((e.dy_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vehicle_on_sinusoid_tangent_has_zero_cg_errors() {
        let cfg = LaneConfig::default();
        let road = Road::sinusoidal(&cfg).unwrap();
        let lane = &road.lanes[1];
        for x in [0.0, 33.0, 120.5] {
            let y = cfg.amplitude * (cfg.frequency * x).sin() + lane.offset;
            let psi = (cfg.amplitude * cfg.frequency * (cfg.frequency * x).cos()).atan();
            let s = VehicleState {
                x,
                y,
                psi,
                ..VehicleState::straight(20.0)
            };
            let e = tracking_errors(&s, &lane.path, 15.0).unwrap();
            assert!(e.dy.abs() < 1e-9, "{}", e.dy);
            assert!(e.dpsi.abs() < 1e-9, "{}", e.dpsi);
        }
    }

    #[test]
    fn circle_curvature_at_look_ahead() {
        let r = 100.0;
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|i| {
                let th = i as f64 * 0.002;
                [r * th.sin(), r - r * th.cos()]
            })
            .collect();
        let p = Path::new(&pts, None, None).unwrap();
        let s = VehicleState::straight(20.0);
        let e = tracking_errors(&s, &p, 15.0).unwrap();
        assert!((e.kappa_s_ref - 0.01).abs() < 1e-6);
    }

    #[test]
    fn reward_examples() {
        let e = TrackingErrors::default();
        assert_eq!(step_reward(&e, 20.0, 20.0), 20.0);
        let e = TrackingErrors {
            dy: 0.5,
            ..Default::default()
        };
        assert!((step_reward(&e, 10.0, 20.0) - 5.0).abs() < 1e-12);
        let e = TrackingErrors {
            dpsi: std::f64::consts::FRAC_PI_2,
            ..Default::default()
        };
        assert!((step_reward(&e, 20.0, 20.0) + 20.0).abs() < 1e-12);
    }

    #[test]
    fn surrounding_vehicle_motion() {
        let srd = SurroundingVehicle {
            lane: 0,
            s: 10.0,
            speed: 15.0,
        };
        let n = surrounding_step(&srd, 0.02);
        assert!((n.s - 10.3).abs() < 1e-12);
        assert_eq!(surrounding_step(&srd, 0.0), srd);

        let road = Road::sinusoidal(&LaneConfig::default()).unwrap();
        let mut cur = srd;
        let mut prev = cur.pose(&road).unwrap();
        for _ in 0..200 {
            cur = surrounding_step(&cur, 0.02);
            let p = cur.pose(&road).unwrap();
            let v = (p.x - prev.x).hypot(p.y - prev.y) / 0.02;
            assert!((v - 15.0).abs() < 1e-3, "{v}");
            prev = p;
        }
    }

    #[test]
    fn straight_lane_keeping_reaches_horizon() {
        let mut e = env(Task::Lk, straight_road_cfg());
        e.reset_to_offsets(0.0, 0.0, 20.0).unwrap();
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let out = e.step(VehicleAction::default(), 0).unwrap();
            total += out.reward;
            steps += 1;
            if out.terminated {
                assert_eq!(out.cause, TerminationCause::Horizon);
                break;
            }
        }
        assert_eq!(steps, 1000);
        assert!((total - 20_000.0).abs() < 1e-6);
    }

    #[test]
    fn large_offset_terminates_with_deviation() {
        let mut e = env(Task::Lk, straight_road_cfg());
        e.reset_to_offsets(2.99, 0.3, 20.0).unwrap();
        let out = e.step(VehicleAction::default(), 0).unwrap();
        assert!(out.terminated);
        assert_eq!(out.cause, TerminationCause::Deviation);
        assert!(out.reward < -900.0);
    }

    #[test]
    fn oa_collision_geometry() {
        let cfg = ScenarioConfig {
            surrounding: SurroundingConfig {
                gap: 5.0,
                speed: 0.0,
                lane: 0,
            },
            ..straight_road_cfg()
        };
        let mut e = env(Task::Oa, cfg);
        e.reset_to_offsets(0.0, 0.0, 20.0).unwrap();
        let out = e.step(VehicleAction::default(), 0).unwrap();
        assert_eq!(out.cause, TerminationCause::Collision);
        assert!(out.reward < -900.0);
    }

    #[test]
    fn lc_command_schedule() {
        let e = env(Task::Lc, ScenarioConfig::default());
        assert_eq!(e.commanded_lane(0), 0);
        assert_eq!(e.commanded_lane(250), 1);
        assert_eq!(e.commanded_lane(649), 1);
        assert_eq!(e.commanded_lane(650), 0);
    }

    #[test]
    fn snapshot_reconstructs_pose() {
        let mut e = env(Task::Lc, ScenarioConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        e.reset(&mut rng).unwrap();
        for _ in 0..30 {
            e.step(VehicleAction::new(0.5, 0.2), 0).unwrap();
        }
        for lane in 0..2 {
            let snap = e.snapshot(lane).unwrap();
            let img = Env::imaginary(
                e.road().clone(),
                e.config().clone(),
                Task::Lc,
                VehicleParams::nominal(),
                &snap,
            )
            .unwrap();
            let (a, b) = (e.state(), img.state());
            assert!((a.x - b.x).abs() < 1e-9);
            assert!((a.y - b.y).abs() < 1e-9);
            assert!((a.course() - b.course()).abs() < 1e-9);
            assert_eq!(a.delta, b.delta);
        }
    }

    #[test]
    fn invalid_eta_is_rejected() {
        let cfg = ScenarioConfig {
            eta: 0.0,
            ..ScenarioConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "eta"),
            other => panic!("{other:?}"),
        }
    }
}
