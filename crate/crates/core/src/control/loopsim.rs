//! Time-domain simulation of the linear tracking loop: the Euler-discretized
//! linear bicycle model, the one-sample steering actuator, the reference
//! heading driven by the previewed curvature, and the look-ahead lateral
//! error integrator, closed through a [`DobController`].

use nalgebra::{DMatrix, Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::dob::DobController;
use crate::control::linear::LinearLateralModel;
use crate::control::tf::eigenvalues;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSample {
    pub t: f64,
    pub dy_s: f64,
    pub dpsi_s: f64,
}

#[derive(Debug, Clone)]
pub struct LinearLoop {
    phi: Matrix3<f64>,
    gamma: Vector3<f64>,
    c: RowVector3<f64>,
    vx: f64,
    ts: f64,
    ctrl: DobController,
    x: Vector3<f64>,
    delta: f64,
    psi_s_ref: f64,
    dy_s: f64,
}

impl LinearLoop {
    /// `plant` is the true linear vehicle; the controller may be designed on
    /// a different nominal model.
    pub fn new(plant: &LinearLateralModel, mut ctrl: DobController) -> Self {
        ctrl.reset();
        Self {
            phi: plant.phi(),
            gamma: plant.gamma(),
            c: plant.c,
            vx: plant.vx,
            ts: plant.ts,
            ctrl,
            x: Vector3::zeros(),
            delta: 0.0,
            psi_s_ref: 0.0,
            dy_s: 0.0,
        }
    }

    pub fn with_initial_dy_s(mut self, dy_s: f64) -> Self {
        self.dy_s = dy_s;
        self
    }

    pub fn dpsi_s(&self) -> f64 {
        (self.c * self.x)[0] - self.psi_s_ref
    }

    /// Advances one sample with reference curvature `kappa`; returns the
    /// errors at the start of the sample.
    pub fn step(&mut self, kappa: f64) -> (f64, f64) {
        let dpsi_s = self.dpsi_s();
        let dy_s = self.dy_s;
        let u = self.ctrl.step(dy_s, dpsi_s);
        self.x = self.phi * self.x + self.gamma * self.delta;
        self.delta = u;
        self.psi_s_ref += self.ts * self.vx * kappa;
        self.dy_s += self.ts * self.vx * dpsi_s;
        (dy_s, dpsi_s)
    }

    /// Response to a step of previewed curvature.
    pub fn curvature_step(mut self, kappa: f64, n_steps: usize) -> Vec<LoopSample> {
        (0..n_steps)
            .map(|k| {
                let (dy_s, dpsi_s) = self.step(kappa);
                LoopSample {
                    t: k as f64 * self.ts,
                    dy_s,
                    dpsi_s,
                }
            })
            .collect()
    }

    /// Loop state without the reference heading, which is an exogenous
    /// integrator of curvature.
    fn state_vector(&self) -> Vec<f64> {
        let mut v = vec![self.x[0], self.x[1], self.x[2], self.delta, self.dy_s];
        v.extend(self.ctrl.state_vector());
        v
    }

    fn set_state_vector(&mut self, v: &[f64]) {
        self.x = Vector3::new(v[0], v[1], v[2]);
        self.delta = v[3];
        self.dy_s = v[4];
        self.ctrl.set_state_vector(&v[5..]);
    }

    /// Closed-loop state matrix with zero curvature input, obtained by
    /// stepping the loop from each unit state.
    pub fn closed_loop_matrix(&self) -> DMatrix<f64> {
        let n = self.state_vector().len();
        let mut m = DMatrix::zeros(n, n);
        let mut probe = self.clone();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            probe.psi_s_ref = 0.0;
            probe.set_state_vector(&e);
            probe.step(0.0);
            let col = probe.state_vector();
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// Spectral radius of [`Self::closed_loop_matrix`]. Falls back to
    /// `‖M^k‖^{1/k}` with `k = 2^20` if the Schur iteration fails.
    pub fn spectral_radius(&self) -> f64 {
        let m = self.closed_loop_matrix();
        match eigenvalues(&m) {
            Some(eig) => eig.iter().fold(0.0, |r, p| r.max(p.norm())),
            None => {
                let (mut power, mut log_scale) = (m, 0.0);
                for _ in 0..20 {
                    power = &power * &power;
                    let norm = power.norm();
                    power /= norm;
                    log_scale = 2.0 * log_scale + norm.ln();
                }
                (log_scale / (1u64 << 20) as f64).exp()
            }
        }
    }
}
