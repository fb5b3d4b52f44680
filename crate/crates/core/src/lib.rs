//! Robust transfer of reinforcement-learning driving policies.
//!
//! A lane-tracking policy is trained with PPO on a nominal bicycle model.
//! On a perturbed target vehicle, the policy drives an imaginary nominal copy
//! of the episode to preview a short reference trajectory, and a
//! disturbance-observer (DOB) tracking controller steers the real vehicle
//! along it.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod policy;
pub mod scenario;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
