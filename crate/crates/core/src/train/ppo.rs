//! Clipped-surrogate PPO loss, its gradient, and the epoch loop.

use crate::error::{Error, Result};
use crate::policy::{ForwardCache, GaussianPolicy, Mlp, PolicyCache};
use crate::train::adam::Adam;
use crate::train::rollout::RolloutBuffer;
use crate::train::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean of `old_log_prob - new_log_prob`.
    pub approx_kl: f64,
}

impl LossParts {
    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy_loss + cfg.value_coef * self.value_loss - cfg.entropy_coef * self.entropy
    }
}

/// Loss over the buffer indices `idx` and its gradient, added to `gp`
/// (policy) and `gv` (value). The buffer must hold advantages and returns.
///
/// `L = -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c_v mean((V - R)^2) - c_e H`.
pub fn loss_and_grad(
    policy: &GaussianPolicy,
    value: &Mlp,
    buf: &RolloutBuffer,
    idx: &[usize],
    cfg: &PpoConfig,
    gp: &mut [f64],
    gv: &mut [f64],
) -> Result<LossParts> {
    let n = idx.len() as f64;
    let eps = cfg.clip_epsilon;
    let mut parts = LossParts::default();
    let mut pcache = PolicyCache::default();
    let mut vcache = ForwardCache::default();
    let mut clipped = 0usize;
    for &i in idx {
        let tr = &buf.transitions[i];
        let adv = buf.advantages[i];
        let mut surrogate = 0.0;
        let lp = policy.log_prob_grad(&tr.obs, &tr.action, gp, &mut pcache, |lp| {
            let ratio = (lp - tr.log_prob).exp();
            let unclipped = ratio * adv;
            let bounded = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            surrogate = unclipped.min(bounded);
            if (ratio - 1.0).abs() > eps {
                clipped += 1;
            }
            if unclipped <= bounded {
                -unclipped / n
            } else {
                0.0
            }
        })?;
        parts.policy_loss -= surrogate / n;
        parts.approx_kl += (tr.log_prob - lp) / n;

        value.forward_cached(&policy.normalize(&tr.obs)?, &mut vcache)?;
        let err = vcache.output()[0] - buf.returns[i];
        parts.value_loss += err * err / n;
        value.backward(&vcache, &[cfg.value_coef * 2.0 * err / n], gv);
    }
    parts.entropy = policy.entropy();
    if cfg.entropy_coef != 0.0 {
        let n_net = policy.net.params().len();
        for g in &mut gp[n_net..] {
            *g -= cfg.entropy_coef;
        }
    }
    parts.clip_fraction = clipped as f64 / n;
    Ok(parts)
}

fn clip_norm(g: &mut [f64], max_norm: Option<f64>) {
    if let Some(max) = max_norm {
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > max {
            let k = max / norm;
            g.iter_mut().for_each(|x| *x *= k);
        }
    }
}

/// Optimizer state for one actor-critic pair.
#[derive(Debug, Clone)]
pub struct PpoOptimizer {
    pub policy: Adam,
    pub value: Adam,
}

impl PpoOptimizer {
    pub fn new(policy: &GaussianPolicy, value: &Mlp, lr: f64) -> Self {
        Self {
            policy: Adam::new(policy.param_count(), lr),
            value: Adam::new(value.params().len(), lr),
        }
    }
}

/// Runs `cfg.epochs_per_iter` passes over the buffer in `cfg.minibatches`
/// contiguous chunks; returns the loss parts averaged over all steps.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value: &mut Mlp,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    opt: &mut PpoOptimizer,
    iteration: u64,
) -> Result<LossParts> {
    let n = buf.len();
    let chunks = cfg.minibatches.clamp(1, n.max(1));
    let size = n.div_ceil(chunks);
    let order: Vec<usize> = (0..n).collect();
    let mut mean = LossParts::default();
    let mut count = 0.0;
    let mut gp = vec![0.0; policy.param_count()];
    let mut gv = vec![0.0; value.params().len()];
    for _ in 0..cfg.epochs_per_iter {
        for idx in order.chunks(size) {
            gp.iter_mut().for_each(|g| *g = 0.0);
            gv.iter_mut().for_each(|g| *g = 0.0);
            let parts = loss_and_grad(policy, value, buf, idx, cfg, &mut gp, &mut gv)?;
            let total = parts.total(cfg);
            if !total.is_finite() || gp.iter().chain(&gv).any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    iteration,
                    detail: format!(
                        "policy_loss={} value_loss={} entropy={}",
                        parts.policy_loss, parts.value_loss, parts.entropy
                    ),
                });
            }
            clip_norm(&mut gp, cfg.max_grad_norm);
            clip_norm(&mut gv, cfg.max_grad_norm);
            let mut flat = policy.flat_params();
            opt.policy.step(&mut flat, &gp);
            policy.set_flat_params(&flat);
            opt.value.step(value.params_mut(), &gv);

            mean.policy_loss += parts.policy_loss;
            mean.value_loss += parts.value_loss;
            mean.entropy += parts.entropy;
            mean.clip_fraction += parts.clip_fraction;
            mean.approx_kl += parts.approx_kl;
            count += 1.0;
        }
    }
    if count > 0.0 {
        mean.policy_loss /= count;
        mean.value_loss /= count;
        mean.entropy /= count;
        mean.clip_fraction /= count;
        mean.approx_kl /= count;
    }
    Ok(mean)
}
