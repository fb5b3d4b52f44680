//! Learned lane tracking, the rule-based modules around it, checkpoints, and
//! the rollout planner.

pub mod checkpoint;
pub mod gaussian;
pub mod hierarchy;
pub mod mlp;
pub mod planner;

pub use checkpoint::Checkpoint;
pub use gaussian::{GaussianPolicy, PolicyCache, ACTION_DIM, OBS_DIM};
pub use hierarchy::{lane_selection, DetectorConfig, HierarchicalAssembly, ObstacleDetector};
pub use mlp::{ForwardCache, Mlp};
pub use planner::{Planner, ReferenceSample, ReferenceTrajectory};
