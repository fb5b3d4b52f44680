use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlrc_core::dynamics::{SideForce, VehicleParams};
use rlrc_core::policy::{
    lane_selection, Checkpoint, DetectorConfig, GaussianPolicy, HierarchicalAssembly, Mlp, ObstacleDetector, Planner,
    OBS_DIM,
};
use rlrc_core::scenario::{
    EgoObservation, Env, Observation, Road, ScenarioConfig, SurroundingObservation, Task, TrackingErrors,
};
use rlrc_core::Error;

fn policy(seed: u64) -> Arc<GaussianPolicy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Arc::new(GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng))
}

fn env(task: Task) -> Env {
    let cfg = Arc::new(ScenarioConfig::default());
    let road = Arc::new(Road::sinusoidal(&cfg.lanes).unwrap());
    let mut env = Env::new(road, cfg, task, VehicleParams::nominal(), SideForce::NONE).unwrap();
    env.reset(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    env
}

fn two_lane_obs(vx: f64, dy_current: f64, surrounding: Option<SurroundingObservation>) -> Observation {
    Observation {
        ego: EgoObservation { vx, ..Default::default() },
        lanes: vec![
            TrackingErrors { dy: dy_current, ..Default::default() },
            TrackingErrors { dy: dy_current - 3.0, ..Default::default() },
        ],
        commanded_lane: None,
        surrounding,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), iteration in any::<u64>(), log_std in -3.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = GaussianPolicy::lane_tracking(&VehicleParams::nominal(), log_std, &mut rng);
        p.log_std[1] = -log_std;
        let value = Mlp::random(&[OBS_DIM, 64, 64, 1], 1.0, &mut rng).unwrap();
        let ckpt = Checkpoint { policy: p, value, iteration };
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ckpt);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncated_checkpoints_are_rejected(cut in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng);
        let value = Mlp::zeros(&[OBS_DIM, 4, 1]).unwrap();
        let bytes = Checkpoint { policy: p, value, iteration: 1 }.to_bytes();
        prop_assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn zero_network_gives_zero_action(obs in prop::array::uniform8(-10.0..10.0f64)) {
        let net = Mlp::zeros(&[OBS_DIM, 64, 64, 2]).unwrap();
        let p = GaussianPolicy::new(net, vec![-0.5; 2], vec![0.0; 8], vec![1.0; 8], vec![5.0, 0.9]).unwrap();
        prop_assert_eq!(p.act_deterministic(&obs).unwrap(), vec![0.0, 0.0]);
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = GaussianPolicy::lane_tracking(&VehicleParams::nominal(), -0.5, &mut rng);
    let value = Mlp::random(&[OBS_DIM, 8, 1], 1.0, &mut rng).unwrap();
    let ckpt = Checkpoint { policy: p, value, iteration: 42 };
    ckpt.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    let mut bad = std::fs::read(&path).unwrap();
    bad[0] ^= 0xff;
    std::fs::write(&path, bad).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

#[test]
fn planner_starts_at_the_current_pose_and_is_deterministic() {
    let e = env(Task::Lk);
    let cfg = e.config().clone();
    let planner = Planner::new(e.road().clone(), cfg.clone(), VehicleParams::nominal(), 60).unwrap();
    let assembly = HierarchicalAssembly::new(policy(1), Task::Lk, cfg.start_lane, DetectorConfig::default());
    let snap = e.snapshot(e.observation().nearest_lane()).unwrap();
    let a = planner.plan(&assembly, &snap).unwrap();
    let b = planner.plan(&assembly, &snap).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.samples.len(), 60);
    assert_eq!(a.actions.len(), 59);
    let first = a.samples[0];
    let s = e.state();
    assert!((first.x - s.x).abs() < 1e-9 && (first.y - s.y).abs() < 1e-9);
    assert!((first.psi_v - s.course()).abs() < 1e-9);
    assert_eq!(first.t, 0.0);
    // Planning does not advance the assembly it was handed.
    assert_eq!(assembly.selection_calls(), 0);
}

#[test]
fn planner_on_the_nominal_plant_reproduces_the_real_rollout() {
    let mut e = env(Task::Lk);
    let cfg = e.config().clone();
    let planner = Planner::new(e.road().clone(), cfg.clone(), VehicleParams::nominal(), 80).unwrap();
    let mut assembly = HierarchicalAssembly::new(policy(2), Task::Lk, cfg.start_lane, DetectorConfig::default());
    let plan = planner.plan(&assembly, &e.snapshot(e.observation().nearest_lane()).unwrap()).unwrap();
    for (k, sample) in plan.samples.iter().enumerate() {
        let s = e.state();
        assert!((sample.x - s.x).abs() < 1e-6 && (sample.y - s.y).abs() < 1e-6, "k = {k}");
        assert!((sample.vx - s.vx).abs() < 1e-9, "k = {k}");
        if k + 1 == plan.samples.len() {
            break;
        }
        let (a, lane) = assembly.act(e.observation()).unwrap();
        let action = assembly.policy().to_vehicle_action(&a);
        assert!((action.ax - plan.actions[k].ax).abs() < 1e-6);
        assert!(!e.step(action, lane).unwrap().terminated);
    }
}

#[test]
fn planner_rejects_zero_horizon() {
    let e = env(Task::Lk);
    assert!(Planner::new(e.road().clone(), e.config().clone(), VehicleParams::nominal(), 0).is_err());
}

#[test]
fn module_invocations_follow_the_task_wiring() {
    for (task, selection, detection) in [(Task::Lk, false, false), (Task::Lc, true, false), (Task::Oa, true, true)] {
        let mut e = env(task);
        let mut assembly = HierarchicalAssembly::new(policy(0), task, e.config().start_lane, DetectorConfig::default());
        let steps = 25;
        for _ in 0..steps {
            let (a, lane) = assembly.act(e.observation()).unwrap();
            e.step(assembly.policy().to_vehicle_action(&a), lane).unwrap();
        }
        assert_eq!(assembly.selection_calls(), if selection { steps } else { 0 }, "{task:?}");
        assert_eq!(assembly.detection_calls(), if detection { steps } else { 0 }, "{task:?}");
        assembly.reset();
        assert_eq!((assembly.selection_calls(), assembly.detection_calls()), (0, 0));
    }
}

#[test]
fn lane_selection_checks_the_index() {
    let obs = two_lane_obs(20.0, 0.4, None);
    let input = lane_selection(&obs, 1).unwrap();
    assert_eq!(input[0], 20.0);
    assert_eq!(input[4], 0.4 - 3.0);
    assert!(matches!(lane_selection(&obs, 2), Err(Error::IndexOutOfRange { index: 2, len: 2 })));
}

#[test]
fn detector_examples() {
    let cfg = DetectorConfig::default();
    let ahead = |dx: f64, dy: f64| Some(SurroundingObservation { v_srd: 10.0, dx_srd: dx, dy_srd: dy });

    // Far ahead in the same lane: no change.
    let mut d = ObstacleDetector::new(cfg);
    assert_eq!(d.update(&two_lane_obs(20.0, 0.0, ahead(200.0, 0.0)), 0), 0);
    assert!(!d.overtaking());

    // Close ahead in the same lane: switch, then hold until passed.
    assert_eq!(d.update(&two_lane_obs(20.0, 0.0, ahead(30.0, 0.0)), 0), 1);
    assert!(d.overtaking());
    assert_eq!(d.update(&two_lane_obs(20.0, 3.0, ahead(0.0, 0.0)), 1), 1);
    assert_eq!(d.update(&two_lane_obs(20.0, 3.0, ahead(-cfg.pass_margin - 1.0, 0.0)), 1), 0);
    assert!(!d.overtaking());

    // Close ahead but in the other lane: no change.
    let mut d = ObstacleDetector::new(cfg);
    assert_eq!(d.update(&two_lane_obs(20.0, 0.0, ahead(30.0, 3.0)), 0), 0);

    // Behind: no change.
    assert_eq!(d.update(&two_lane_obs(20.0, 0.0, ahead(-5.0, 0.0)), 0), 0);
    assert_eq!(cfg.trigger_distance(10.0, 10.0), cfg.min_trigger);
}
