//! Diagonal Gaussian policy with a tanh-squashed mean and state-independent
//! log standard deviation, acting in normalized action space `[-1, 1]^2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{VehicleAction, VehicleParams};
use crate::error::{Error, Result};
use crate::policy::mlp::{ForwardCache, Mlp};

pub const OBS_DIM: usize = 8;
pub const ACTION_DIM: usize = 2;
pub const HIDDEN: usize = 64;

/// Fixed affine observation scaling `(obs - offset) / scale` for
/// `[vx, vy, wz, delta, dy, dpsi, dy_s, dpsi_s]`.
pub const OBS_OFFSET: [f64; OBS_DIM] = [20.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const OBS_SCALE: [f64; OBS_DIM] = [5.0, 1.0, 0.5, 0.2, 1.5, 0.2, 3.0, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
    pub obs_offset: Vec<f64>,
    pub obs_scale: Vec<f64>,
    /// Physical magnitude of a unit normalized action: `[ax_max, ddelta_max]`.
    pub action_scale: Vec<f64>,
}

/// Scratch space for gradient evaluation.
#[derive(Debug, Clone, Default)]
pub struct PolicyCache {
    forward: ForwardCache,
    normalized: Vec<f64>,
}

fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

impl GaussianPolicy {
    pub fn new(net: Mlp, log_std: Vec<f64>, obs_offset: Vec<f64>, obs_scale: Vec<f64>, action_scale: Vec<f64>) -> Result<Self> {
        let (n_in, n_out) = (net.input_dim(), net.output_dim());
        if obs_offset.len() != n_in || obs_scale.len() != n_in {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: obs_offset.len().min(obs_scale.len()),
            });
        }
        if log_std.len() != n_out || action_scale.len() != n_out {
            return Err(Error::DimensionMismatch {
                expected: n_out,
                got: log_std.len().min(action_scale.len()),
            });
        }
        if obs_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("obs_scale", "entries must be > 0"));
        }
        Ok(Self {
            net,
            log_std,
            obs_offset,
            obs_scale,
            action_scale,
        })
    }

    /// Lane-tracking policy `8 -> 64 -> 64 -> 2` with small initial output
    /// weights.
    pub fn lane_tracking<R: Rng + ?Sized>(params: &VehicleParams, init_log_std: f64, rng: &mut R) -> Self {
        let net = Mlp::random(&[OBS_DIM, HIDDEN, HIDDEN, ACTION_DIM], 0.01, rng).expect("valid sizes");
        Self::new(
            net,
            vec![init_log_std; ACTION_DIM],
            OBS_OFFSET.to_vec(),
            OBS_SCALE.to_vec(),
            vec![params.ax_max, params.ddelta_max],
        )
        .expect("consistent dimensions")
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// Number of trainable parameters: network weights then log-std.
    pub fn param_count(&self) -> usize {
        self.net.params().len() + self.log_std.len()
    }

    pub fn normalize(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(obs
            .iter()
            .zip(&self.obs_offset)
            .zip(&self.obs_scale)
            .map(|((o, off), s)| (o - off) / s)
            .collect())
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.net.forward(&self.normalize(obs)?)?;
        Ok(out.iter().map(|v| v.tanh()).collect())
    }

    /// Reparameterized draw `mean + std * eps`, unclamped, with its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + ls.exp() * eps
            })
            .collect();
        let lp = gaussian_log_prob(&action, &mean, &self.log_std);
        Ok((action, lp))
    }

    /// Normalized action in `[-1, 1]`: the mean, or a clamped sample.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], stochastic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let a = if stochastic { self.sample(obs, rng)?.0 } else { self.mean(obs)? };
        Ok(a.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    pub fn act_deterministic(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean(obs)?.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.mean(obs)?;
        Ok(gaussian_log_prob(action, &mean, &self.log_std))
    }

    /// Log-density of `action`. Adds `w * d(log p)/d(params)` to `grad`
    /// (network weights first, then log-std), where `w = weight(log p)`.
    pub fn log_prob_grad(
        &self,
        obs: &[f64],
        action: &[f64],
        grad: &mut [f64],
        cache: &mut PolicyCache,
        weight: impl FnOnce(f64) -> f64,
    ) -> Result<f64> {
        debug_assert_eq!(grad.len(), self.param_count());
        cache.normalized = self.normalize(obs)?;
        self.net.forward_cached(&cache.normalized, &mut cache.forward)?;
        let mean: Vec<f64> = cache.forward.output().iter().map(|v| v.tanh()).collect();
        let lp = gaussian_log_prob(action, &mean, &self.log_std);
        let w = weight(lp);
        if w == 0.0 {
            return Ok(lp);
        }
        let n_net = self.net.params().len();
        let mut g_out = vec![0.0; mean.len()];
        for i in 0..mean.len() {
            let var = (2.0 * self.log_std[i]).exp();
            let diff = action[i] - mean[i];
            g_out[i] = w * diff / var * (1.0 - mean[i] * mean[i]);
            grad[n_net + i] += w * (diff * diff / var - 1.0);
        }
        self.net.backward(&cache.forward, &g_out, &mut grad[..n_net]);
        Ok(lp)
    }

    /// Entropy of the action distribution; its gradient is 1 per log-std.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
            .sum()
    }

    /// Flat parameter vector matching [`Self::log_prob_grad`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.net.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let n = self.net.params().len();
        self.net.params_mut().copy_from_slice(&p[..n]);
        self.log_std.copy_from_slice(&p[n..]);
    }

    /// Physical action from a normalized one; components are clamped to `[-1, 1]`.
    pub fn to_vehicle_action(&self, a: &[f64]) -> VehicleAction {
        VehicleAction {
            ax: a[0].clamp(-1.0, 1.0) * self.action_scale[0],
            ddelta: a[1].clamp(-1.0, 1.0) * self.action_scale[1],
        }
    }

    /// Inverse of [`Self::to_vehicle_action`] on in-range actions.
    pub fn from_vehicle_action(&self, action: &VehicleAction) -> Vec<f64> {
        vec![action.ax / self.action_scale[0], action.ddelta / self.action_scale[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_policy() -> GaussianPolicy {
        let net = Mlp::zeros(&[OBS_DIM, 4, ACTION_DIM]).unwrap();
        GaussianPolicy::new(net, vec![-0.5; 2], OBS_OFFSET.to_vec(), OBS_SCALE.to_vec(), vec![5.0, 0.927]).unwrap()
    }

    #[test]
    fn zero_network_acts_zero() {
        let p = zero_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.act(&[18.0, 0.1, 0.0, 0.0, 0.3, 0.0, 1.0, 0.0], false, &mut rng).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng);
        let obs = [18.0, 0.1, 0.0, 0.0, 0.3, 0.0, 1.0, 0.0];
        let run = || {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| p.act(&obs, true, &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn log_prob_of_mean_is_normalizer() {
        let p = zero_policy();
        let lp = p.log_prob(&[0.0; 8], &[0.0, 0.0]).unwrap();
        let expected = 2.0 * (0.5 - 0.5 * (2.0 * PI).ln());
        assert!((lp - expected).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let p = zero_policy();
        assert!(matches!(p.mean(&[0.0; 4]), Err(Error::DimensionMismatch { .. })));
    }
}
