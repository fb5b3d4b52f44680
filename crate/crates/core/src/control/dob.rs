//! Proportional look-ahead feedback with a disturbance observer.
//!
//! The feedback law is `u_c = -k1 dpsi_s - k2 dy_s = -k2 C1 dpsi_s` with
//! `C1 = k1/k2 + vx Ts z⁻¹ / (1 - z⁻¹)`. The observer treats
//! `Pn = Gnv C1 = z⁻² P̂n` as the plant seen from the steering command and
//! corrects the command with
//! `d̂ = Q (P̂n⁻¹ y - z⁻² u)`, `u = u_c - d̂`, where `y = C1 dpsi_s` is
//! realized from the measured errors as `(k1/k2) dpsi_s + dy_s`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::tf::{DiscreteTf, IirFilter, Poly};
use crate::error::{Error, Result};

/// Relative tolerance for the leading numerator coefficients of `Pn`.
pub const DELAY_TOLERANCE: f64 = 1e-12;

/// Delay of the nominal plant `Gnv C1` required by the observer.
pub const PLANT_DELAY: usize = 2;

/// Second-order Butterworth low-pass, bilinear transform with prewarping at
/// the cutoff. Unit DC gain.
pub fn q_filter(cutoff_hz: f64, ts: f64) -> Result<DiscreteTf> {
    if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 / ts) {
        return Err(Error::invalid(
            "q_cutoff_hz",
            format!("cutoff must lie in (0, {}) Hz", 0.5 / ts),
        ));
    }
    let k = (PI * cutoff_hz * ts).tan();
    let k2 = k * k;
    let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
    let b0 = k2 * norm;
    DiscreteTf::from_coeffs(
        &[b0, 2.0 * b0, b0],
        &[1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
    )
}

/// `C1 = k1/k2 + vx Ts z⁻¹ / (1 - z⁻¹)`.
pub fn c1_tf(gain_ratio: f64, vx: f64, ts: f64) -> DiscreteTf {
    DiscreteTf::gain(gain_ratio).parallel(&DiscreteTf::integrator(vx * ts))
}

#[derive(Debug, Clone)]
pub struct DobController {
    k1: f64,
    k2: f64,
    c1: DiscreteTf,
    gnv: DiscreteTf,
    pn: DiscreteTf,
    pn_hat: DiscreteTf,
    q: DiscreteTf,
    dob_enabled: bool,
    /// `Q P̂n⁻¹`, driven by `y`.
    observer: IirFilter,
    /// `Q`, driven by `u` delayed two samples.
    input_path: IirFilter,
    input_delay: [f64; PLANT_DELAY],
    last_estimate: f64,
}

/// Builds the controller. `gnv` maps steering command to `psi_vs` and must
/// make `Gnv C1` exactly two samples late.
pub fn dob_build(gnv: &DiscreteTf, c1: &DiscreteTf, k2: f64, q: &DiscreteTf) -> Result<DobController> {
    let gain_ratio = feedthrough(c1);
    let pn = gnv.series(c1);
    let delay = pn.delay_steps(DELAY_TOLERANCE);
    if delay != PLANT_DELAY {
        return Err(Error::DelayMismatch(format!(
            "Gnv C1 has {delay} samples of delay, expected {PLANT_DELAY}"
        )));
    }
    let pn_hat = DiscreteTf::new(pn.num().advanced(PLANT_DELAY), pn.den().clone())?;
    let observer_tf = q.series(&pn_hat.inverse()?);
    Ok(DobController {
        k1: gain_ratio * k2,
        k2,
        c1: c1.clone(),
        gnv: gnv.clone(),
        pn,
        pn_hat,
        q: q.clone(),
        dob_enabled: true,
        observer: IirFilter::new(&observer_tf),
        input_path: IirFilter::new(q),
        input_delay: [0.0; PLANT_DELAY],
        last_estimate: 0.0,
    })
}

/// Direct feedthrough of a transfer function; for `C1` this is `k1/k2`.
fn feedthrough(tf: &DiscreteTf) -> f64 {
    tf.num().coeffs()[0] / tf.den().coeffs()[0]
}

impl DobController {
    pub fn with_dob(mut self, enabled: bool) -> Self {
        self.dob_enabled = enabled;
        self
    }

    pub fn dob_enabled(&self) -> bool {
        self.dob_enabled
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn c1(&self) -> &DiscreteTf {
        &self.c1
    }

    pub fn gnv(&self) -> &DiscreteTf {
        &self.gnv
    }

    pub fn pn(&self) -> &DiscreteTf {
        &self.pn
    }

    pub fn pn_hat(&self) -> &DiscreteTf {
        &self.pn_hat
    }

    pub fn q(&self) -> &DiscreteTf {
        &self.q
    }

    pub fn last_estimate(&self) -> f64 {
        self.last_estimate
    }

    pub fn reset(&mut self) {
        self.observer.reset();
        self.input_path.reset();
        self.input_delay = [0.0; PLANT_DELAY];
        self.last_estimate = 0.0;
    }

    /// Steering-angle command from the look-ahead errors.
    pub fn step(&mut self, dy_s: f64, dpsi_s: f64) -> f64 {
        let y = (self.k1 / self.k2) * dpsi_s + dy_s;
        let u_c = -self.k2 * y;
        let u = if self.dob_enabled {
            let delayed = self.input_delay[PLANT_DELAY - 1];
            let estimate = self.observer.process(y) - self.input_path.process(delayed);
            self.last_estimate = estimate;
            u_c - estimate
        } else {
            u_c
        };
        self.input_delay.rotate_right(1);
        self.input_delay[0] = u;
        u
    }

    /// Replaces the most recent command with the angle the actuator actually
    /// reached, so the observer does not integrate saturation.
    pub fn record_applied(&mut self, applied: f64) {
        self.input_delay[0] = applied;
    }

    /// Stacked internal state, for building closed-loop realizations. Empty
    /// when the observer is disabled, since the feedback law is static.
    pub fn state_vector(&self) -> Vec<f64> {
        if !self.dob_enabled {
            return Vec::new();
        }
        let mut v = self.observer.state().to_vec();
        v.extend_from_slice(self.input_path.state());
        v.extend_from_slice(&self.input_delay);
        v
    }

    pub fn set_state_vector(&mut self, v: &[f64]) {
        if !self.dob_enabled {
            return;
        }
        let n1 = self.observer.state().len();
        let n2 = self.input_path.state().len();
        self.observer.set_state(&v[..n1]);
        self.input_path.set_state(&v[n1..n1 + n2]);
        self.input_delay.copy_from_slice(&v[n1 + n2..n1 + n2 + PLANT_DELAY]);
    }

    /// Sensitivity `(1 - z⁻² Q) / (1 + k2 Gv C1 + z⁻² (Gv/Gnv - 1) Q)` for
    /// the true plant `gv`. With the observer disabled `Q = 0`.
    pub fn sensitivity(&self, gv: &DiscreteTf) -> Result<Sensitivity> {
        let (nq, dq) = if self.dob_enabled {
            (self.q.num().clone(), self.q.den().clone())
        } else {
            (Poly::constant(0.0), Poly::constant(1.0))
        };
        let (nv, dv) = (gv.num(), gv.den());
        let (nn, dn) = (self.gnv.num(), self.gnv.den());
        let (nc, dc) = (self.c1.num(), self.c1.den());
        if nn.is_zero() {
            return Err(Error::DegenerateTransferFunction("nominal plant is zero".into()));
        }
        let z2 = Poly::shift(PLANT_DELAY);
        let mismatch = nv.mul(dn).sub(&nn.mul(dv));
        let den = dv
            .mul(dc)
            .mul(&dq)
            .mul(nn)
            .add(&nv.mul(nc).mul(&dq).mul(nn).scale(self.k2))
            .add(&z2.mul(&mismatch).mul(&nq).mul(dc));
        if den.is_zero() {
            return Err(Error::DegenerateTransferFunction("sensitivity denominator vanishes".into()));
        }
        Ok(Sensitivity {
            num_factors: vec![dq.sub(&z2.mul(&nq)), dv.clone(), dc.clone(), nn.clone()],
            den,
        })
    }
}

/// Sensitivity with its numerator kept as a product of factors, so the zeros
/// at `z = 1` evaluate exactly instead of through cancelling coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    num_factors: Vec<Poly>,
    den: Poly,
}

impl Sensitivity {
    pub fn num_factors(&self) -> &[Poly] {
        &self.num_factors
    }

    pub fn num(&self) -> Poly {
        self.num_factors
            .iter()
            .fold(Poly::constant(1.0), |acc, f| acc.mul(f))
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let num = self
            .num_factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, f| acc * f.eval(z));
        num / self.den.eval(z)
    }

    pub fn to_tf(&self) -> Result<DiscreteTf> {
        DiscreteTf::new(self.num(), self.den.clone())
    }

    /// Divides numerator and denominator by a common factor; fails when
    /// either remainder exceeds `tol` relative to the dividend.
    pub fn cancel(&self, common: &Poly, tol: f64) -> Result<DiscreteTf> {
        let num = self.num();
        let (qn, rn) = num.div_rem(common)?;
        let (qd, rd) = self.den.div_rem(common)?;
        if rn.max_abs() > tol * num.max_abs() || rd.max_abs() > tol * self.den.max_abs() {
            return Err(Error::DegenerateTransferFunction(
                "factor does not divide the sensitivity".into(),
            ));
        }
        DiscreteTf::new(qn, qd)
    }
}

/// Nominal-loop sensitivity `(1 - z⁻² Q) / (1 + k2 Gnv C1)` built directly,
/// for comparison with [`DobController::sensitivity`].
pub fn nominal_sensitivity(ctrl: &DobController) -> Result<DiscreteTf> {
    let loop_tf = ctrl.gnv().series(ctrl.c1()).scaled(ctrl.k2());
    let s0 = DiscreteTf::gain(1.0).feedback(&loop_tf)?;
    let q_term = if ctrl.dob_enabled() {
        DiscreteTf::gain(1.0).parallel(&ctrl.q().delayed(PLANT_DELAY).scaled(-1.0))
    } else {
        DiscreteTf::gain(1.0)
    };
    Ok(q_term.series(&s0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Look-ahead distance d_s, m.
    pub look_ahead: f64,
    /// Speed the observer and gains are designed at, m/s.
    pub design_speed: f64,
    /// `k1 / k2`.
    pub gain_ratio: f64,
    /// Fixed `k2`; when absent the gain sweep picks it.
    pub k2: Option<f64>,
    pub k2_grid: Vec<f64>,
    pub sweep_speeds: Vec<f64>,
    /// Required worst-case closed-loop pole radius for the sweep.
    pub max_pole_radius: f64,
    pub q_cutoff_hz: f64,
    pub dob_enabled: bool,
    /// Speed-error gain of the longitudinal channel, 1/s.
    pub speed_gain: f64,
    /// Samples between a steering command and its effect on the tires.
    pub actuator_delay: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            look_ahead: 15.0,
            design_speed: 20.0,
            gain_ratio: 10.0,
            // Sweep limit is 0.0575 (set by vx = 10); this leaves margin for
            // ±20% parameter variation.
            k2: Some(0.02),
            k2_grid: (1..=200).map(|i| i as f64 * 0.0025).collect(),
            sweep_speeds: vec![10.0, 15.0, 20.0, 25.0],
            max_pole_radius: 1.0 - 1e-6,
            q_cutoff_hz: 1.0,
            dob_enabled: true,
            speed_gain: 1.0,
            actuator_delay: 1,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.look_ahead > 0.0) {
            return Err(Error::invalid("look_ahead", "must be > 0"));
        }
        if !(self.gain_ratio > 0.0) {
            return Err(Error::invalid("gain_ratio", "must be > 0"));
        }
        if let Some(k2) = self.k2 {
            if !(k2 > 0.0) {
                return Err(Error::invalid("k2", "must be > 0"));
            }
        }
        if self.k2.is_none() && (self.k2_grid.is_empty() || self.sweep_speeds.is_empty()) {
            return Err(Error::invalid("k2_grid", "gain sweep needs non-empty grids"));
        }
        if !(self.q_cutoff_hz > 0.0) {
            return Err(Error::invalid("q_cutoff_hz", "must be > 0"));
        }
        if self.actuator_delay + 1 != PLANT_DELAY {
            return Err(Error::invalid(
                "actuator_delay",
                "observer design assumes one sample of actuator delay",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::linear::{linear_model, steering_path_tf};
    use crate::dynamics::VehicleParams;

    fn nominal_controller(k2: f64) -> DobController {
        let p = VehicleParams::nominal();
        let m = linear_model(&p, 20.0, 15.0).unwrap();
        let gnv = steering_path_tf(&m, 1).unwrap();
        let c1 = c1_tf(10.0, 20.0, p.dt);
        let q = q_filter(1.0, p.dt).unwrap();
        dob_build(&gnv, &c1, k2, &q).unwrap()
    }

    #[test]
    fn q_has_unit_dc_gain_and_is_stable() {
        let q = q_filter(1.0, 0.02).unwrap();
        assert!((q.dc_gain() - 1.0).abs() < 1e-12);
        assert!(q.is_stable());
        assert!(q_filter(30.0, 0.02).is_err());
    }

    #[test]
    fn delay_identity() {
        let c = nominal_controller(0.02);
        let lhs = c.pn().num().coeffs();
        let rhs = c.pn_hat().num().delayed(PLANT_DELAY);
        assert_eq!(lhs.len(), rhs.coeffs().len());
        for (a, b) in lhs.iter().zip(rhs.coeffs()) {
            assert!((a - b).abs() <= 1e-12 * c.pn().num().max_abs());
        }
        assert_eq!(c.pn().den(), c.pn_hat().den());
    }

    #[test]
    fn missing_delay_is_rejected() {
        let p = VehicleParams::nominal();
        let m = linear_model(&p, 20.0, 15.0).unwrap();
        let gnv = steering_path_tf(&m, 0).unwrap();
        let c1 = c1_tf(10.0, 20.0, p.dt);
        let q = q_filter(1.0, p.dt).unwrap();
        assert!(matches!(
            dob_build(&gnv, &c1, 0.02, &q),
            Err(Error::DelayMismatch(_))
        ));
    }

    #[test]
    fn zero_errors_give_zero_command() {
        let mut c = nominal_controller(0.02);
        for _ in 0..10 {
            assert_eq!(c.step(0.0, 0.0), 0.0);
        }
    }

    #[test]
    fn one_step_without_observer() {
        let mut c = nominal_controller(0.02).with_dob(false);
        let u = c.step(0.0, 0.01);
        assert!((u + c.k1() * 0.01).abs() < 1e-15);
    }

    #[test]
    fn sensitivity_vanishes_at_dc() {
        let c = nominal_controller(0.02);
        let s = c.sensitivity(c.gnv()).unwrap();
        assert!(s.evaluate(Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // Triple zero at z = 1: |S| scales with the cube of a small frequency.
        let at = |w: f64| s.evaluate(Complex64::from_polar(1.0, w)).norm();
        let ratio = at(2e-3) / at(1e-3);
        assert!((ratio - 8.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn disabled_observer_sensitivity_is_nominal() {
        let c = nominal_controller(0.02).with_dob(false);
        let s = c.sensitivity(c.gnv()).unwrap();
        let loop_tf = c.gnv().series(c.c1()).scaled(c.k2());
        let s0 = DiscreteTf::gain(1.0).feedback(&loop_tf).unwrap();
        for z in [Complex64::new(0.4, 0.7), Complex64::new(-0.9, 0.2)] {
            assert!((s.evaluate(z) - s0.evaluate(z)).norm() < 1e-9);
        }
    }
}
