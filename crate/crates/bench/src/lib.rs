//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlrc_core::dynamics::{SideForce, VehicleParams};
use rlrc_core::policy::GaussianPolicy;
use rlrc_core::scenario::{Env, Road, ScenarioConfig, Task};

/// Seeded lane-tracking policy with the production network shape.
pub fn policy() -> Arc<GaussianPolicy> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Arc::new(GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng))
}

/// Nominal environment of `task`, reset from a fixed seed.
pub fn env(task: Task) -> Env {
    let cfg = Arc::new(ScenarioConfig::default());
    let road = Arc::new(Road::sinusoidal(&cfg.lanes).expect("default lanes"));
    let mut env = Env::new(road, cfg, task, VehicleParams::nominal(), SideForce::NONE).expect("default scenario");
    env.reset(&mut ChaCha8Rng::seed_from_u64(1)).expect("reset");
    env
}
