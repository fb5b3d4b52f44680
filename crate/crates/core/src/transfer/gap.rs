//! Modeling gaps between the nominal training vehicle and a target vehicle.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::linear::{discretize, linear_model};
use crate::control::tf::DiscreteTf;
use crate::dynamics::{SideForce, VehicleParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    None,
    ParamVariation,
    SideForce,
}

impl fmt::Display for GapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapKind::None => "none",
            GapKind::ParamVariation => "params",
            GapKind::SideForce => "force",
        })
    }
}

impl FromStr for GapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(GapKind::None),
            "params" | "param_variation" => Ok(GapKind::ParamVariation),
            "force" | "side_force" => Ok(GapKind::SideForce),
            other => Err(Error::invalid("gap", format!("unknown gap kind '{other}' (none|params|force)"))),
        }
    }
}

/// One gap category at one magnitude: a variation bound (fraction) for
/// parameter variation, or a force in newtons for side force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelingGap {
    pub kind: GapKind,
    pub level: f64,
}

impl ModelingGap {
    pub const NONE: ModelingGap = ModelingGap {
        kind: GapKind::None,
        level: 0.0,
    };

    pub fn params(bound: f64) -> Self {
        Self {
            kind: GapKind::ParamVariation,
            level: bound,
        }
    }

    pub fn side_force(newtons: f64) -> Self {
        Self {
            kind: GapKind::SideForce,
            level: newtons,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GapKind::ParamVariation if !(0.0..0.5).contains(&self.level) => {
                Err(Error::invalid("gap_level", "variation bound must lie in [0, 0.5)"))
            }
            GapKind::SideForce if !self.level.is_finite() => Err(Error::invalid("gap_level", "force must be finite")),
            _ => Ok(()),
        }
    }

    /// Target plant for one episode.
    pub fn realize<R: Rng + ?Sized>(&self, nominal: &VehicleParams, rng: &mut R) -> Result<(VehicleParams, SideForce)> {
        self.validate()?;
        Ok(match self.kind {
            GapKind::None => (nominal.clone(), SideForce::NONE),
            GapKind::ParamVariation => (perturb_params(nominal, self.level, rng)?, SideForce::NONE),
            GapKind::SideForce => (nominal.clone(), SideForce::new(self.level)),
        })
    }
}

/// Multiplies each of a, b, m, Iz, B, C, E, mu by an independent
/// `1 + bound U(-1, 1)`. The unit draws do not depend on `bound`, so one
/// seed gives the same perturbation direction at every level. Draws
/// violating the parameter invariants are redrawn.
pub fn perturb_params<R: Rng + ?Sized>(nominal: &VehicleParams, bound: f64, rng: &mut R) -> Result<VehicleParams> {
    if !(0.0..0.5).contains(&bound) {
        return Err(Error::invalid("bound", "variation bound must lie in [0, 0.5)"));
    }
    for _ in 0..100 {
        let mut f = || 1.0 + bound * rng.random_range(-1.0..1.0);
        let p = VehicleParams {
            a: nominal.a * f(),
            b: nominal.b * f(),
            m: nominal.m * f(),
            iz: nominal.iz * f(),
            pacejka_b: nominal.pacejka_b * f(),
            pacejka_c: nominal.pacejka_c * f(),
            pacejka_e: nominal.pacejka_e * f(),
            mu: nominal.mu * f(),
            ..nominal.clone()
        };
        if p.validate().is_ok() {
            return Ok(p);
        }
    }
    Err(Error::invalid("bound", "could not draw a valid perturbed vehicle"))
}

pub fn sample_plant_variations<R: Rng + ?Sized>(
    nominal: &VehicleParams,
    bound: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<VehicleParams>> {
    (0..n).map(|_| perturb_params(nominal, bound, rng)).collect()
}

/// Steering-to-`psi_vs` transfer function of a vehicle at speed `vx`.
pub fn vehicle_tf(params: &VehicleParams, vx: f64, look_ahead: f64) -> Result<DiscreteTf> {
    discretize(&linear_model(params, vx, look_ahead)?)
}

/// Bode data `(omega rad/s, magnitude dB, phase deg)` of each vehicle.
pub fn bode_samples(
    vehicles: &[VehicleParams],
    vx: f64,
    look_ahead: f64,
    omegas: &[f64],
) -> Result<Vec<Vec<(f64, f64, f64)>>> {
    vehicles
        .iter()
        .map(|p| Ok(vehicle_tf(p, vx, look_ahead)?.frequency_response(omegas, p.dt)))
        .collect()
}
