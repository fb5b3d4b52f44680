use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rlrc_bench::{env, policy};
use rlrc_core::control::{build_controller, ControllerConfig};
use rlrc_core::dynamics::{step, SideForce, VehicleAction, VehicleParams, VehicleState};
use rlrc_core::policy::{DetectorConfig, HierarchicalAssembly, Planner};
use rlrc_core::scenario::Task;

fn dynamics_step(c: &mut Criterion) {
    let p = VehicleParams::nominal();
    let s = VehicleState { vx: 20.0, vy: 0.3, wz: 0.1, delta: 0.05, ..Default::default() };
    let a = VehicleAction::new(0.5, 0.2);
    c.bench_function("dynamics_step", |b| {
        b.iter(|| step(black_box(&s), black_box(&a), &p, &SideForce::new(5000.0)).unwrap())
    });
}

fn mlp_forward(c: &mut Criterion) {
    let policy = policy();
    let obs = [18.0, 0.1, 0.02, 0.01, 0.3, 0.05, 1.0, 0.02];
    c.bench_function("policy_mean_8x64x64x2", |b| b.iter(|| policy.mean(black_box(&obs)).unwrap()));
}

fn planner(c: &mut Criterion) {
    let e = env(Task::Oa);
    let planner = Planner::new(e.road().clone(), e.config().clone(), VehicleParams::nominal(), 50).unwrap();
    let assembly = HierarchicalAssembly::new(policy(), Task::Oa, e.config().start_lane, DetectorConfig::default());
    let snap = e.snapshot(e.observation().nearest_lane()).unwrap();
    c.bench_function("planner_50_steps", |b| b.iter(|| planner.plan(&assembly, black_box(&snap)).unwrap()));
}

fn controller_step(c: &mut Criterion) {
    let mut ctrl = build_controller(&VehicleParams::nominal(), &ControllerConfig::default()).unwrap();
    c.bench_function("dob_controller_step", |b| {
        b.iter(|| {
            let u = ctrl.step(black_box(0.1), black_box(-0.01));
            ctrl.record_applied(u);
            u
        })
    });
}

criterion_group!(benches, dynamics_step, mlp_forward, planner, controller_step);
criterion_main!(benches);
