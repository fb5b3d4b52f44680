//! Gain selection by closed-loop pole sweep, and controller synthesis from
//! a [`ControllerConfig`].

use serde::{Deserialize, Serialize};

use crate::control::dob::{c1_tf, dob_build, q_filter, ControllerConfig, DobController};
use crate::control::linear::{linear_model, steering_path_tf};
use crate::control::tf::DiscreteTf;
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k2: f64,
    pub vx: f64,
    pub max_pole_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainDesign {
    pub k1: f64,
    pub k2: f64,
    pub report: Vec<SweepRow>,
}

/// Closed loop of the proportional law `1 + k2 Gnv C1 = 0` at speed `vx`.
pub fn nominal_loop(params: &VehicleParams, vx: f64, cfg: &ControllerConfig, k2: f64) -> Result<DiscreteTf> {
    let model = linear_model(params, vx, cfg.look_ahead)?;
    let gnv = steering_path_tf(&model, cfg.actuator_delay)?;
    let open = gnv.series(&c1_tf(cfg.gain_ratio, vx, params.dt)).scaled(k2);
    DiscreteTf::gain(1.0).feedback(&open)
}

/// Sweeps `k2` at a fixed `k1/k2` and returns the largest gain whose
/// worst-case pole radius over `speeds` stays below `cfg.max_pole_radius`.
pub fn feedback_gains(
    params: &VehicleParams,
    cfg: &ControllerConfig,
    k2_grid: &[f64],
    speeds: &[f64],
) -> Result<GainDesign> {
    if k2_grid.is_empty() || speeds.is_empty() {
        return Err(Error::invalid("k2_grid", "gain sweep needs non-empty grids"));
    }
    let mut report = Vec::with_capacity(k2_grid.len() * speeds.len());
    let mut best: Option<f64> = None;
    for &k2 in k2_grid {
        let mut worst: f64 = 0.0;
        for &vx in speeds {
            let radius = nominal_loop(params, vx, cfg, k2)?.max_pole_radius();
            worst = worst.max(radius);
            report.push(SweepRow {
                k2,
                vx,
                max_pole_radius: radius,
            });
        }
        if worst < cfg.max_pole_radius && best.is_none_or(|b| k2 > b) {
            best = Some(k2);
        }
    }
    let k2 = best.ok_or(Error::NoStabilizingGain)?;
    Ok(GainDesign {
        k1: cfg.gain_ratio * k2,
        k2,
        report,
    })
}

/// Builds the tracking controller on the nominal vehicle at the design speed.
pub fn build_controller(nominal: &VehicleParams, cfg: &ControllerConfig) -> Result<DobController> {
    cfg.validate()?;
    let k2 = match cfg.k2 {
        Some(k2) => k2,
        None => feedback_gains(nominal, cfg, &cfg.k2_grid, &cfg.sweep_speeds)?.k2,
    };
    let vx = cfg.design_speed;
    let model = linear_model(nominal, vx, cfg.look_ahead)?;
    let gnv = steering_path_tf(&model, cfg.actuator_delay)?;
    let c1 = c1_tf(cfg.gain_ratio, vx, nominal.dt);
    let q = q_filter(cfg.q_cutoff_hz, nominal.dt)?;
    Ok(dob_build(&gnv, &c1, k2, &q)?.with_dob(cfg.dob_enabled))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gain_leaves_integrators_marginal() {
        let p = VehicleParams::nominal();
        let cfg = ControllerConfig::default();
        let cl = nominal_loop(&p, 20.0, &cfg, 0.0).unwrap();
        // Double root at z = 1; its computed location is only sqrt(eps) accurate.
        assert!((cl.max_pole_radius() - 1.0).abs() < 1e-6);
        assert!(feedback_gains(&p, &cfg, &[0.0], &[20.0]).is_err());
    }
}
