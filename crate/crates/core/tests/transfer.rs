use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlrc_core::control::linear_model;
use rlrc_core::dynamics::VehicleParams;
use rlrc_core::policy::GaussianPolicy;
use rlrc_core::scenario::{ScenarioConfig, Task};
use rlrc_core::transfer::{
    episode_seed, mean_std, perturb_params, run_experiment, sample_plant_variations, ExperimentContext,
    ExperimentSpec, GapKind, ModelingGap, RlrcConfig, Strategy,
};

proptest! {
    #[test]
    fn zero_bound_reproduces_the_nominal_vehicle(seed in any::<u64>()) {
        let nominal = VehicleParams::nominal();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(perturb_params(&nominal, 0.0, &mut rng).unwrap(), nominal);
    }

    #[test]
    fn perturbed_parameters_stay_inside_the_box(seed in any::<u64>(), bound in 0.0..0.45f64) {
        let n = VehicleParams::nominal();
        let p = perturb_params(&n, bound, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for (v, v0) in [(p.a, n.a), (p.b, n.b), (p.m, n.m), (p.iz, n.iz), (p.pacejka_b, n.pacejka_b),
                        (p.pacejka_c, n.pacejka_c), (p.pacejka_e, n.pacejka_e), (p.mu, n.mu)] {
            prop_assert!((v / v0 - 1.0).abs() <= bound * (1.0 + 1e-12));
        }
        prop_assert_eq!((p.dt, p.delta_max), (n.dt, n.delta_max));
    }

    #[test]
    fn same_seed_gives_the_same_direction_at_every_level(seed in any::<u64>(), lo in 0.001..0.015f64, hi in 0.015..0.03f64) {
        let n = VehicleParams::nominal();
        let a = perturb_params(&n, lo, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = perturb_params(&n, hi, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        // Small bounds never need a redraw, so both levels share the unit
        // draws and relative deviations scale by hi / lo.
        for (x, y, x0) in [(a.m, b.m, n.m), (a.iz, b.iz, n.iz), (a.pacejka_e, b.pacejka_e, n.pacejka_e), (a.mu, b.mu, n.mu)] {
            let (u, v) = ((x / x0 - 1.0) / lo, (y / x0 - 1.0) / hi);
            prop_assert!((u - v).abs() < 1e-9, "{} vs {}", u, v);
        }
    }

    #[test]
    fn episode_seeds_depend_on_task_and_episode(master in any::<u64>(), ep in 0usize..10_000) {
        prop_assert_eq!(episode_seed(master, Task::Lc, ep), episode_seed(master, Task::Lc, ep));
        prop_assert_ne!(episode_seed(master, Task::Lc, ep), episode_seed(master, Task::Oa, ep));
        prop_assert_ne!(episode_seed(master, Task::Lk, ep), episode_seed(master, Task::Lk, ep + 1));
    }

    #[test]
    fn identical_samples_have_zero_spread(x in -1e6..1e6f64, n in 1usize..50) {
        let (mean, std) = mean_std(&vec![x; n]);
        prop_assert_eq!(std, 0.0);
        prop_assert!((mean - x).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn mean_std_matches_a_two_pass_oracle() {
    let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
    let (mean, std) = mean_std(&xs);
    assert_eq!(mean, 5.0);
    // Sum of squared deviations is 32 over N - 1 = 7.
    assert!((std - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    assert!(mean_std(&[]).0.is_nan());
}

#[test]
fn episode_seeds_are_distinct_across_a_matrix() {
    let mut seen = HashSet::new();
    for task in Task::ALL {
        for ep in 0..1000 {
            assert!(seen.insert(episode_seed(7, task, ep)));
        }
    }
}

/// `a11 = -mu (Cf + Cr) / (m vx)` collapses to `-mu B C g / vx`: mass and
/// axle positions cancel, so only three factors can move it.
#[test]
fn linearized_a11_stays_in_its_interval_envelope() {
    let nominal = VehicleParams::nominal();
    let a0 = linear_model(&nominal, 20.0, 15.0).unwrap().a[(0, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (lo, hi) = (0.8f64.powi(3), 1.2f64.powi(3));
    for p in sample_plant_variations(&nominal, 0.2, 500, &mut rng).unwrap() {
        let ratio = linear_model(&p, 20.0, 15.0).unwrap().a[(0, 0)] / a0;
        assert!(ratio >= lo - 1e-12 && ratio <= hi + 1e-12, "{ratio}");
        let direct = p.mu * p.pacejka_b * p.pacejka_c / (nominal.mu * nominal.pacejka_b * nominal.pacejka_c);
        assert!((ratio - direct).abs() < 1e-9);
    }
}

#[test]
fn gap_kinds_parse_and_validate() {
    assert_eq!("params".parse::<GapKind>().unwrap(), GapKind::ParamVariation);
    assert_eq!("FORCE".parse::<GapKind>().unwrap(), GapKind::SideForce);
    assert!("wind".parse::<GapKind>().is_err());
    assert!(ModelingGap::params(0.5).validate().is_err());
    assert!(ModelingGap::side_force(f64::INFINITY).validate().is_err());
    assert!("rl-rc".parse::<Strategy>().is_ok());
}

#[test]
fn experiments_are_reproducible_from_the_master_seed() {
    // An untrained policy keeps episodes short.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let policy = Arc::new(GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng));
    let ctx = ExperimentContext::new(policy, VehicleParams::nominal(), ScenarioConfig::default(), RlrcConfig::default())
        .unwrap();
    let spec = ExperimentSpec {
        tasks: vec![Task::Lk, Task::Lc],
        strategies: Strategy::ALL.to_vec(),
        gaps: vec![ModelingGap::NONE, ModelingGap::params(0.1), ModelingGap::side_force(2000.0)],
        episodes_per_cell: 2,
        master_seed: 3,
    };
    let a = run_experiment(&ctx, &spec).unwrap();
    let b = run_experiment(&ctx, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 2 * 2 * 3);
    assert_eq!(a.raw.len(), 2 * 2 * 3 * 2);
    assert!(a.cells.iter().all(|c| c.n == 2 && c.errors == 0));
    // Every cell of a task sees the same episode seeds.
    let seeds = |task: Task| {
        a.raw.iter().filter(|r| r.task == task).map(|r| r.seed).collect::<HashSet<_>>()
    };
    assert_eq!(seeds(Task::Lk).len(), 2);
    assert_eq!(seeds(Task::Lc).len(), 2);
}

#[test]
fn invalid_gaps_abort_the_experiment() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let policy = Arc::new(GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng));
    let ctx = ExperimentContext::new(policy, VehicleParams::nominal(), ScenarioConfig::default(), RlrcConfig::default())
        .unwrap();
    let spec = ExperimentSpec {
        tasks: vec![Task::Lk],
        strategies: vec![Strategy::Baseline],
        gaps: vec![ModelingGap::params(0.7)],
        episodes_per_cell: 1,
        master_seed: 0,
    };
    assert!(run_experiment(&ctx, &spec).is_err());
}
