//! Transition storage, rollout collection, and generalized advantage
//! estimation.

use rand::Rng;

use crate::error::Result;
use crate::policy::{GaussianPolicy, Mlp, OBS_DIM};
use crate::scenario::{Env, TerminationCause};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: [f64; OBS_DIM],
    /// Unclamped Gaussian sample in normalized action space.
    pub action: [f64; 2],
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// Terminal failure: no bootstrap past this step.
    pub done: bool,
    /// Episode cut by the horizon or the end of the batch; bootstrap with
    /// `next_value`.
    pub truncated: bool,
    pub next_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Number of episode fragments (segments between boundaries).
    pub fn fragments(&self) -> usize {
        self.transitions.iter().filter(|t| t.done || t.truncated).count()
    }

    /// GAE(λ) advantages and λ-returns on rewards multiplied by `reward_scale`.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64, reward_scale: f64) {
        let n = self.transitions.len();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        let mut gae = 0.0;
        for t in (0..n).rev() {
            let tr = &self.transitions[t];
            let next_value = if tr.done {
                0.0
            } else if tr.truncated {
                tr.next_value
            } else {
                self.transitions[t + 1].value
            };
            let carry = if tr.done || tr.truncated { 0.0 } else { gae };
            let delta = reward_scale * tr.reward + gamma * next_value - tr.value;
            gae = delta + gamma * lambda * carry;
            self.advantages[t] = gae;
            self.returns[t] = gae + tr.value;
        }
    }

    /// Shifts and scales advantages to zero mean and unit (population)
    /// variance; a constant batch becomes all zeros.
    pub fn normalize_advantages(&mut self) {
        normalize(&mut self.advantages);
    }
}

pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter_mut().for_each(|x| *x -= mean);
    let std = (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    if std > 1e-12 {
        xs.iter_mut().for_each(|x| *x /= std);
    } else {
        xs.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Statistics of an episode completed during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub length: usize,
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub cause: TerminationCause,
}

/// Lane-tracking episode runner that persists across batches.
#[derive(Debug, Clone)]
pub struct Collector {
    pub env: Env,
    pub lane: usize,
    pub gamma: f64,
    length: usize,
    discounted: f64,
    undiscounted: f64,
}

impl Collector {
    pub fn new<R: Rng + ?Sized>(mut env: Env, gamma: f64, rng: &mut R) -> Result<Self> {
        env.reset(rng)?;
        let lane = env.config().start_lane;
        Ok(Self {
            env,
            lane,
            gamma,
            length: 0,
            discounted: 0.0,
            undiscounted: 0.0,
        })
    }

    /// Collects exactly `steps` transitions with stochastic actions.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        policy: &GaussianPolicy,
        value: &Mlp,
        steps: usize,
        rng: &mut R,
        finished: &mut Vec<EpisodeStats>,
    ) -> Result<RolloutBuffer> {
        let mut buf = RolloutBuffer::default();
        buf.transitions.reserve(steps);
        for k in 0..steps {
            let obs = self.env.observation().tracking_input(self.lane)?;
            let (a, log_prob) = policy.sample(&obs, rng)?;
            let v = value.forward(&policy.normalize(&obs)?)?[0];
            let outcome = self.env.step(policy.to_vehicle_action(&a), self.lane)?;

            self.undiscounted += outcome.reward;
            self.discounted += self.gamma.powi(self.length as i32) * outcome.reward;
            self.length += 1;

            let done = matches!(
                outcome.cause,
                TerminationCause::Deviation | TerminationCause::Collision
            );
            let truncated = !done && (outcome.terminated || k + 1 == steps);
            let next_value = if truncated {
                let next = self.env.observation().tracking_input(self.lane)?;
                value.forward(&policy.normalize(&next)?)?[0]
            } else {
                0.0
            };
            buf.transitions.push(Transition {
                obs,
                action: [a[0], a[1]],
                log_prob,
                reward: outcome.reward,
                value: v,
                done,
                truncated,
                next_value,
            });
            if outcome.terminated {
                finished.push(EpisodeStats {
                    length: self.length,
                    discounted_return: self.discounted,
                    undiscounted_return: self.undiscounted,
                    cause: outcome.cause,
                });
                self.env.reset(rng)?;
                self.length = 0;
                self.discounted = 0.0;
                self.undiscounted = 0.0;
            }
        }
        Ok(buf)
    }

    /// Steps into the episode currently running.
    pub fn running_length(&self) -> usize {
        self.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, value: f64, done: bool, truncated: bool, next_value: f64) -> Transition {
        Transition {
            obs: [0.0; OBS_DIM],
            action: [0.0; 2],
            log_prob: 0.0,
            reward,
            value,
            done,
            truncated,
            next_value,
        }
    }

    #[test]
    fn gae_with_lambda_one_is_discounted_return() {
        let mut b = RolloutBuffer {
            transitions: vec![tr(1.0, 0.0, false, false, 0.0), tr(2.0, 0.0, false, false, 0.0), tr(3.0, 0.0, true, false, 0.0)],
            ..Default::default()
        };
        b.compute_advantages(0.5, 1.0, 1.0);
        assert_eq!(b.returns, vec![1.0 + 0.5 * 2.0 + 0.25 * 3.0, 2.0 + 0.5 * 3.0, 3.0]);
    }

    #[test]
    fn truncation_bootstraps_and_blocks_carry() {
        let mut b = RolloutBuffer {
            transitions: vec![tr(1.0, 0.5, false, true, 10.0), tr(1.0, 0.0, false, true, 4.0)],
            ..Default::default()
        };
        b.compute_advantages(0.9, 0.95, 1.0);
        assert!((b.advantages[0] - (1.0 + 9.0 - 0.5)).abs() < 1e-12);
        assert!((b.advantages[1] - (1.0 + 3.6)).abs() < 1e-12);
        assert_eq!(b.fragments(), 2);
    }

    #[test]
    fn normalization_moments() {
        let mut xs = vec![3.0, -1.0, 7.5, 0.25, 2.0];
        normalize(&mut xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
        let mut flat = vec![2.0; 4];
        normalize(&mut flat);
        assert_eq!(flat, vec![0.0; 4]);
    }
}
