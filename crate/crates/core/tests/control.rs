use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

use rlrc_core::control::{
    build_controller, eigenvalues, feedback_gains, linear_model, nominal_loop, steering_path_tf, ControllerConfig,
    DiscreteTf, LinearLoop,
};
use rlrc_core::dynamics::{step, SideForce, VehicleAction, VehicleParams, VehicleState};
use rlrc_core::scenario::{tracking_errors, Path};

fn controller(dob: bool) -> rlrc_core::control::DobController {
    let cfg = ControllerConfig {
        dob_enabled: dob,
        ..ControllerConfig::default()
    };
    build_controller(&VehicleParams::nominal(), &cfg).unwrap()
}

proptest! {
    #[test]
    fn disabled_observer_is_the_proportional_law(inputs in prop::collection::vec((-2.0..2.0f64, -0.5..0.5f64), 1..200)) {
        let mut ctrl = controller(false);
        let (k1, k2) = (ctrl.k1(), ctrl.k2());
        for (dy_s, dpsi_s) in inputs {
            let u = ctrl.step(dy_s, dpsi_s);
            let reference = -k1 * dpsi_s - k2 * dy_s;
            prop_assert!((u - reference).abs() <= 1e-15 * (1.0 + reference.abs()));
        }
    }

    #[test]
    fn reset_clears_observer_state(inputs in prop::collection::vec((-2.0..2.0f64, -0.5..0.5f64), 1..50)) {
        let mut ctrl = controller(true);
        for (dy_s, dpsi_s) in &inputs {
            ctrl.step(*dy_s, *dpsi_s);
        }
        ctrl.reset();
        prop_assert!(ctrl.state_vector().iter().all(|v| *v == 0.0));
        prop_assert_eq!(ctrl.step(0.0, 0.0), 0.0);
    }

    #[test]
    fn dc_rejection_under_stable_mismatch(scale in 0.8..1.2f64, vx in 15.0..25.0f64) {
        let ctrl = controller(true);
        let nominal = VehicleParams::nominal();
        let target = VehicleParams { m: nominal.m * scale, iz: nominal.iz * scale, ..nominal };
        let gv = steering_path_tf(&linear_model(&target, vx, 15.0).unwrap(), 1).unwrap();
        let s = ctrl.sensitivity(&gv).unwrap();
        if s.to_tf().unwrap().is_stable() {
            prop_assert!(s.evaluate(Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }
}

/// `C (jw I - A)^{-1} B` of the continuous model, delayed by one sample to
/// match the actuator.
fn continuous_response(m: &rlrc_core::control::LinearLateralModel, w: f64) -> Complex64 {
    let a = m.a.map(|v| Complex64::new(v, 0.0));
    let lhs = Matrix3::<Complex64>::identity() * Complex64::new(0.0, w) - a;
    let b: Vector3<Complex64> = m.b.map(|v| Complex64::new(v, 0.0));
    let x = lhs.lu().solve(&b).unwrap();
    let y = m.c.map(|v| Complex64::new(v, 0.0)) * x;
    y[(0, 0)] * Complex64::from_polar(1.0, -w * m.ts)
}

#[test]
fn discrete_response_tracks_continuous_model_at_low_frequency() {
    let m = linear_model(&VehicleParams::nominal(), 20.0, 15.0).unwrap();
    let g = steering_path_tf(&m, 1).unwrap();
    for w in [0.1, 0.2, 0.5, 1.0, 2.0] {
        let z = Complex64::from_polar(1.0, w * m.ts);
        let d = g.evaluate(z);
        let c = continuous_response(&m, w);
        assert!((d.norm() - c.norm()).abs() / c.norm() < 0.02, "w = {w}: {} vs {}", d.norm(), c.norm());
    }
}

#[test]
fn emitted_gains_pass_an_independent_eigenvalue_check() {
    let nominal = VehicleParams::nominal();
    let cfg = ControllerConfig::default();
    let design = feedback_gains(&nominal, &cfg, &cfg.k2_grid, &cfg.sweep_speeds).unwrap();
    for &k2 in &[design.k2, cfg.k2.unwrap()] {
        for &vx in &cfg.sweep_speeds {
            let plant = linear_model(&nominal, vx, cfg.look_ahead).unwrap();
            let mut loop_cfg = cfg.clone();
            loop_cfg.k2 = Some(k2);
            loop_cfg.dob_enabled = false;
            let lp = LinearLoop::new(&plant, build_controller(&nominal, &loop_cfg).unwrap());
            // nalgebra's own unbounded Schur iteration, independent of the
            // crate's root finders.
            let radius = lp
                .closed_loop_matrix()
                .complex_eigenvalues()
                .iter()
                .fold(0.0f64, |r, e| r.max(e.norm()));
            assert!(radius < 1.0 - 1e-6, "k2 = {k2}, vx = {vx}: radius {radius}");
            let tf_radius = nominal_loop(&nominal, vx, &cfg, k2).unwrap().max_pole_radius();
            assert!((radius - tf_radius).abs() < 1e-6);
        }
    }
    // The default observer loop at the design speed.
    let plant = linear_model(&nominal, cfg.design_speed, cfg.look_ahead).unwrap();
    let lp = LinearLoop::new(&plant, build_controller(&nominal, &cfg).unwrap());
    let m = lp.closed_loop_matrix();
    let radius = eigenvalues(&m).unwrap().iter().fold(0.0f64, |r, e| r.max(e.norm()));
    assert!(radius < 1.0, "{radius}");
}

#[test]
fn linear_loop_matches_the_nonlinear_plant_for_small_errors() {
    let p = VehicleParams::nominal();
    let cfg = ControllerConfig::default();
    let plant = linear_model(&p, 20.0, 15.0).unwrap();
    let straight = Path::new(&[[-100.0, 0.0], [1000.0, 0.0]], Some(&[0.0, 0.0]), Some(&[0.0, 0.0])).unwrap();
    for dy0 in [0.1, -0.05] {
        let ctrl = build_controller(&p, &cfg).unwrap();
        let linear = LinearLoop::new(&plant, ctrl.clone()).with_initial_dy_s(dy0).curvature_step(0.0, 50);

        let mut ctrl = ctrl;
        let mut s = VehicleState { vx: 20.0, y: dy0, ..Default::default() };
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for sample in &linear {
            let e = tracking_errors(&s, &straight, 15.0).unwrap();
            worst = worst.max((e.dy_s - sample.dy_s).abs());
            scale = scale.max(sample.dy_s.abs());
            let cmd = ctrl.step(e.dy_s, e.dpsi_s);
            let action = VehicleAction::new(0.0, (cmd - s.delta) / p.dt);
            s = step(&s, &action, &p, &SideForce::NONE).unwrap();
            ctrl.record_applied(s.delta);
        }
        assert!(worst <= 0.1 * scale, "dy0 = {dy0}: {worst} vs {scale}");
    }
}

#[test]
fn transfer_function_algebra_examples() {
    let z1 = DiscreteTf::delay(1);
    assert_eq!(z1.series(&z1), DiscreteTf::delay(2));
    let ramp = DiscreteTf::integrator(0.02).step_response(6);
    for (n, v) in ramp.iter().enumerate() {
        assert!((v - 0.02 * n as f64).abs() < 1e-15);
    }
}

#[test]
fn controller_config_round_trips_through_shared_handles() {
    let cfg = Arc::new(ControllerConfig::default());
    let a = build_controller(&VehicleParams::nominal(), &cfg).unwrap();
    let b = build_controller(&VehicleParams::nominal(), &cfg).unwrap();
    assert_eq!(a.k1(), b.k1());
    assert_eq!(a.pn_hat(), b.pn_hat());
}
