//! Zero-shot transfer to target vehicles: gaps, episodes, and experiments.

pub mod episode;
pub mod experiment;
pub mod gap;

pub use episode::{run_baseline, EpisodeResult, RlrcAgent, RlrcConfig};
pub use experiment::{
    episode_seed, mean_std, run_experiment, CellSummary, ExperimentContext, ExperimentSpec, ExperimentSummary,
    RawRow, Strategy,
};
pub use gap::{bode_samples, perturb_params, sample_plant_variations, vehicle_tf, GapKind, ModelingGap};
