//! Constant-speed linear bicycle model for lateral dynamics and its
//! forward-Euler discretization.

use nalgebra::{DMatrix, Matrix3, RowVector3, Vector3};

use crate::control::tf::{DiscreteTf, Poly};
use crate::dynamics::{Axle, VehicleParams, VX_FLOOR};
use crate::error::{Error, Result};

/// `x = [vy, psi, psi_dot]`, input `delta`, output `psi_vs = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLateralModel {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub c: RowVector3<f64>,
    pub vx: f64,
    pub look_ahead: f64,
    pub ts: f64,
    /// Front cornering stiffness excluding friction, N/rad.
    pub c_alpha_f: f64,
    /// Rear cornering stiffness excluding friction, N/rad.
    pub c_alpha_r: f64,
    pub mu: f64,
}

/// Cornering stiffness of one axle from the Magic-Formula slope at zero slip,
/// with friction factored out: `B C m g L / (a + b)`.
pub fn cornering_stiffness(params: &VehicleParams, axle: Axle) -> f64 {
    params.pacejka_b * params.pacejka_c * params.peak_force(axle) / params.mu
}

pub fn linear_model(params: &VehicleParams, vx: f64, look_ahead: f64) -> Result<LinearLateralModel> {
    if !(vx >= VX_FLOOR) {
        return Err(Error::DegenerateSpeed { vx, floor: VX_FLOOR });
    }
    params.validate()?;
    let cf = cornering_stiffness(params, Axle::Front);
    let cr = cornering_stiffness(params, Axle::Rear);
    let (mu, m, iz, lf, lr) = (params.mu, params.m, params.iz, params.a, params.b);

    let a11 = -(mu * cf + mu * cr) / (m * vx);
    let a13 = -vx - (mu * cf * lf - mu * cr * lr) / (m * vx);
    let a31 = (-mu * cf * lf + mu * cr * lr) / (iz * vx);
    let a33 = -(mu * cf * lf * lf + mu * cr * lr * lr) / (iz * vx);
    let b1 = mu * cf / m;
    let b3 = mu * cf * lf / iz;

    Ok(LinearLateralModel {
        a: Matrix3::new(a11, 0.0, a13, 0.0, 0.0, 1.0, a31, 0.0, a33),
        b: Vector3::new(b1, 0.0, b3),
        c: RowVector3::new(1.0 / vx, 1.0, look_ahead / vx),
        vx,
        look_ahead,
        ts: params.dt,
        c_alpha_f: cf,
        c_alpha_r: cr,
        mu,
    })
}

impl LinearLateralModel {
    /// Euler transition matrix `I + Ts A`.
    pub fn phi(&self) -> Matrix3<f64> {
        Matrix3::identity() + self.a * self.ts
    }

    pub fn gamma(&self) -> Vector3<f64> {
        self.b * self.ts
    }
}

/// `C (zI - Phi)^{-1} Gamma` as a rational function of z⁻¹, for any square
/// `phi`, via the Faddeev-LeVerrier recursion.
pub fn state_space_tf(phi: &DMatrix<f64>, gamma: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DiscreteTf> {
    let n = phi.nrows();
    if phi.ncols() != n || gamma.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gamma.nrows(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut den = vec![1.0];
    let mut num = vec![0.0];
    let mut adj = eye.clone();
    for k in 1..=n {
        num.push((c * &adj * gamma)[(0, 0)]);
        let m_adj = phi * &adj;
        let ck = -m_adj.trace() / k as f64;
        den.push(ck);
        adj = m_adj + &eye * ck;
    }
    DiscreteTf::new(Poly::new(num), Poly::new(den))
}

/// Nominal vehicle transfer function from steering angle to `psi_vs`.
pub fn discretize(model: &LinearLateralModel) -> Result<DiscreteTf> {
    let phi = DMatrix::from_iterator(3, 3, model.phi().iter().copied());
    let gamma = DMatrix::from_iterator(3, 1, model.gamma().iter().copied());
    let c = DMatrix::from_iterator(1, 3, model.c.iter().copied());
    state_space_tf(&phi, &gamma, &c)
}

/// Steering-command to `psi_vs` transfer function. The plant integrates the
/// steering rate, so a commanded angle reaches the tires one sample later.
pub fn steering_path_tf(model: &LinearLateralModel, actuator_delay: usize) -> Result<DiscreteTf> {
    Ok(discretize(model)?.delayed(actuator_delay))
}
