//! Nonlinear single-track (bicycle) vehicle model with Magic-Formula lateral
//! tire forces, integrated with forward Euler.
//!
//! The same model serves as the nominal source plant and, with perturbed
//! [`VehicleParams`] and an optional [`SideForce`], as the target plant.
//!
//! Axle normal loads follow the published model verbatim: the front tire
//! force scales with `a / (a + b)` and the rear with `b / (a + b)`. This is
//! the reverse of the usual static load split and is kept on purpose so the
//! nominal vehicle matches the reference model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Below this longitudinal speed the slip-angle arguments are ill-conditioned.
pub const VX_FLOOR: f64 = 0.5;

/// Seven-state vehicle state. Also used as the container for its time
/// derivative (see [`derivatives`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal speed, m/s.
    pub vx: f64,
    /// Lateral speed, m/s.
    pub vy: f64,
    /// Yaw rate, rad/s.
    pub wz: f64,
    /// Global x, m.
    pub x: f64,
    /// Global y, m.
    pub y: f64,
    /// Yaw angle, rad.
    pub psi: f64,
    /// Front-wheel steering angle, rad.
    pub delta: f64,
}

impl VehicleState {
    pub fn straight(vx: f64) -> Self {
        Self {
            vx,
            ..Default::default()
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.vx, self.vy, self.wz, self.x, self.y, self.psi, self.delta,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            vx: v[0],
            vy: v[1],
            wz: v[2],
            x: v[3],
            y: v[4],
            psi: v[5],
            delta: v[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Body side-slip angle, the angle between velocity and heading.
    pub fn slip(&self) -> f64 {
        self.vy.atan2(self.vx)
    }

    /// Course angle `psi + beta` of the velocity vector at the CG.
    pub fn course(&self) -> f64 {
        self.psi + self.slip()
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// `self + h * rate`, component-wise.
    pub fn advanced(&self, rate: &VehicleState, h: f64) -> VehicleState {
        let mut out = self.to_array();
        for (o, r) in out.iter_mut().zip(rate.to_array()) {
            *o += h * r;
        }
        VehicleState::from_array(out)
    }
}

/// Physical actuator command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleAction {
    /// Longitudinal acceleration, m/s².
    pub ax: f64,
    /// Steering-angle rate, rad/s.
    pub ddelta: f64,
}

impl VehicleAction {
    pub fn new(ax: f64, ddelta: f64) -> Self {
        Self { ax, ddelta }
    }

    pub fn clamped(&self, params: &VehicleParams) -> Self {
        Self {
            ax: self.ax.clamp(-params.ax_max, params.ax_max),
            ddelta: self.ddelta.clamp(-params.ddelta_max, params.ddelta_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Mass, kg.
    pub m: f64,
    /// Yaw inertia, kg·m².
    pub iz: f64,
    /// CG to front axle, m.
    pub a: f64,
    /// CG to rear axle, m.
    pub b: f64,
    /// Road friction coefficient.
    pub mu: f64,
    pub pacejka_b: f64,
    pub pacejka_c: f64,
    pub pacejka_e: f64,
    /// Steering-angle limit, rad.
    pub delta_max: f64,
    /// Steering-rate limit, rad/s.
    pub ddelta_max: f64,
    /// Longitudinal acceleration limit, m/s².
    pub ax_max: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl VehicleParams {
    pub const fn nominal() -> Self {
        Self {
            m: 1800.0,
            iz: 3270.0,
            a: 1.2,
            b: 1.65,
            mu: 1.0,
            pacejka_b: 10.0,
            pacejka_c: 1.9,
            pacejka_e: 0.97,
            delta_max: 0.573,
            ddelta_max: 0.927,
            ax_max: 5.0,
            dt: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("iz", self.iz),
            ("a", self.a),
            ("b", self.b),
            ("mu", self.mu),
            ("dt", self.dt),
            ("delta_max", self.delta_max),
            ("ddelta_max", self.ddelta_max),
            ("ax_max", self.ax_max),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(field, format!("must be positive, got {value}")));
            }
        }
        for (field, value) in [
            ("pacejka_b", self.pacejka_b),
            ("pacejka_c", self.pacejka_c),
            ("pacejka_e", self.pacejka_e),
        ] {
            if !value.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.a + self.b
    }

    /// Peak lateral force of one axle, `mu * m * g * L_axle / (a + b)`.
    pub fn peak_force(&self, axle: Axle) -> f64 {
        let lever = match axle {
            Axle::Front => self.a,
            Axle::Rear => self.b,
        };
        self.mu * self.m * GRAVITY * lever / self.wheelbase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

/// Constant external force along the global Y axis, applied at the CG.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideForce {
    /// Newtons.
    pub fy: f64,
}

impl SideForce {
    pub const NONE: SideForce = SideForce { fy: 0.0 };

    pub fn new(fy: f64) -> Self {
        Self { fy }
    }
}

/// Magic-Formula lateral force of one axle at slip angle `alpha`.
pub fn tire_force(alpha: f64, axle: Axle, params: &VehicleParams) -> f64 {
    let (b, c, e) = (params.pacejka_b, params.pacejka_c, params.pacejka_e);
    let ba = b * alpha;
    params.peak_force(axle) * (c * (ba - e * (ba - ba.atan())).atan()).sin()
}

/// Front and rear slip angles.
pub fn slip_angles(state: &VehicleState, params: &VehicleParams) -> Result<(f64, f64)> {
    check_speed(state.vx)?;
    let alpha_f = state.delta - ((state.vy + params.a * state.wz) / state.vx).atan();
    let alpha_r = -((state.vy - params.b * state.wz) / state.vx).atan();
    Ok((alpha_f, alpha_r))
}

fn check_speed(vx: f64) -> Result<()> {
    if vx > VX_FLOOR {
        Ok(())
    } else {
        Err(Error::DegenerateSpeed {
            vx,
            floor: VX_FLOOR,
        })
    }
}

/// Continuous-time state derivative. `action` is applied as given; callers
/// clamp it first.
pub fn derivatives(
    state: &VehicleState,
    action: &VehicleAction,
    params: &VehicleParams,
    side_force: &SideForce,
) -> Result<VehicleState> {
    let (alpha_f, alpha_r) = slip_angles(state, params)?;
    let ff = tire_force(alpha_f, Axle::Front, params);
    let fr = tire_force(alpha_r, Axle::Rear, params);
    let (sin_psi, cos_psi) = state.psi.sin_cos();

    // Global-Y force resolved onto the body axes.
    let f_long = side_force.fy * sin_psi;
    let f_lat = side_force.fy * cos_psi;

    let cos_delta = state.delta.cos();
    Ok(VehicleState {
        vx: action.ax + f_long / params.m,
        vy: -state.vx * state.wz + (ff * cos_delta + fr + f_lat) / params.m,
        wz: (params.a * ff * cos_delta - params.b * fr) / params.iz,
        x: state.vx * cos_psi - state.vy * sin_psi,
        y: state.vx * sin_psi + state.vy * cos_psi,
        psi: state.wz,
        delta: action.ddelta,
    })
}

/// One forward-Euler step: clamp the action, integrate, clamp the steering angle.
pub fn step(
    state: &VehicleState,
    action: &VehicleAction,
    params: &VehicleParams,
    side_force: &SideForce,
) -> Result<VehicleState> {
    step_with_dt(state, action, params, side_force, params.dt)
}

pub fn step_with_dt(
    state: &VehicleState,
    action: &VehicleAction,
    params: &VehicleParams,
    side_force: &SideForce,
    dt: f64,
) -> Result<VehicleState> {
    let action = action.clamped(params);
    let rate = derivatives(state, &action, params, side_force)?;
    let mut next = state.advanced(&rate, dt);
    next.delta = next.delta.clamp(-params.delta_max, params.delta_max);
    Ok(next)
}
