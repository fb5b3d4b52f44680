use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rlrc_core::control::{
    build_controller, feedback_gains, linear_model, log_grid, nominal_loop, steering_path_tf, ControllerConfig,
    LinearLoop,
};
use rlrc_core::dynamics::VehicleParams;
use rlrc_core::policy::{Checkpoint, GaussianPolicy};
use rlrc_core::scenario::TraceRow;
use rlrc_core::train::{train_lane_tracking, LogRow};
use rlrc_core::transfer::{
    bode_samples, episode_seed, run_experiment, sample_plant_variations, ExperimentContext, ExperimentSpec,
    ExperimentSummary,
};

use crate::args::{AnalyzeKind, Command};
use crate::config::RunConfig;
use crate::output::{num, RunDir};
use crate::CliError;

const RAW_HEADER: [&str; 9] = [
    "task",
    "strategy",
    "gap_kind",
    "gap_level_fraction_or_n",
    "seed",
    "length_steps",
    "discounted_return",
    "undiscounted_return",
    "cause",
];

const TRACE_HEADER: [&str; 11] = [
    "t_s", "x_m", "y_m", "psi_rad", "vx_m_s", "vy_m_s", "wz_rad_s", "delta_rad", "dy_m", "dpsi_rad", "reward",
];

const FREQ_HEADER: [&str; 4] = ["curve", "omega_rad_s", "magnitude_db", "phase_deg"];

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Train => train(cfg),
        Command::Evaluate => evaluate(cfg),
        Command::Transfer => transfer(cfg),
        Command::Analyze { kind } => analyze(*kind, cfg),
        Command::Export => export(cfg),
    }
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Checkpoint, CliError> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Config("`checkpoint` is required for this command".into()))?;
    Checkpoint::load(path).map_err(|e| CliError::Runtime(format!("cannot load {}: {e}", path.display())))
}

fn context(cfg: &RunConfig) -> Result<ExperimentContext, CliError> {
    let policy: Arc<GaussianPolicy> = Arc::new(load_checkpoint(cfg)?.policy);
    Ok(ExperimentContext::new(policy, cfg.vehicle.clone(), cfg.scenario.clone(), cfg.rlrc.clone())?)
}

fn log_row(r: &LogRow) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        num(r.mean_discounted_return),
        num(r.mean_episode_length),
        num(r.policy_loss),
        num(r.value_loss),
        num(r.clip_fraction),
    ]
}

fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let resume = cfg.checkpoint.as_ref().map(|_| load_checkpoint(cfg)).transpose()?;
    let start = resume.as_ref().map_or(0, |c| c.iteration);
    let mut run = RunDir::create(cfg, "train")?;
    let outcome = train_lane_tracking(&cfg.vehicle, &cfg.scenario, &cfg.ppo, resume, |r| {
        eprintln!(
            "iteration {:>6}  return {:>10.3}  length {:>7.1}",
            r.iteration, r.mean_discounted_return, r.mean_episode_length
        );
    })?;
    let ckpt_path = run.file("policy.ckpt");
    outcome.checkpoint.save(&ckpt_path)?;
    let header = [
        "iteration",
        "mean_discounted_return",
        "mean_episode_length_steps",
        "policy_loss",
        "value_loss",
        "clip_fraction",
    ];
    run.write_csv("log.csv", &header, outcome.log.iter().map(log_row))?;

    let converged = outcome.converged();
    let failed = cfg.train.require_convergence && !converged;
    let results = json!({
        "start_iteration": start,
        "final_iteration": outcome.checkpoint.iteration,
        "success_iteration": outcome.success_iteration,
        "converged": converged,
        "checkpoint_out": "policy.ckpt",
    });
    let dir = run.finish(cfg, if failed { "not_converged" } else { "ok" }, results)?;
    println!("{}", dir.display());
    if failed {
        return Err(CliError::NotConverged(format!(
            "no sustained success within {} iterations",
            cfg.ppo.max_iterations
        )));
    }
    Ok(())
}

fn raw_rows(summary: &ExperimentSummary) -> impl Iterator<Item = Vec<String>> + '_ {
    summary.raw.iter().map(|r| {
        vec![
            r.task.to_string(),
            r.strategy.to_string(),
            r.gap_kind.to_string(),
            num(r.gap_level),
            r.seed.to_string(),
            r.length.to_string(),
            num(r.discounted_return),
            num(r.undiscounted_return),
            r.cause.clone(),
        ]
    })
}

fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let spec = ExperimentSpec {
        tasks: vec![cfg.task],
        strategies: vec![cfg.strategy],
        gaps: vec![cfg.gap],
        episodes_per_cell: cfg.episodes,
        master_seed: cfg.seed,
    };
    let summary = run_experiment(&ctx, &spec)?;
    let mut run = RunDir::create(cfg, "evaluate")?;
    run.write_csv("episodes.csv", &RAW_HEADER, raw_rows(&summary))?;
    let cell = &summary.cells[0];
    println!(
        "{} {} {}: length {:.1} ± {:.1}, return {:.3} ± {:.3} over {} episodes",
        cell.task, cell.strategy, cell.gap_kind, cell.length_mean, cell.length_std, cell.return_mean, cell.return_std, cell.n
    );
    run.finish(cfg, "ok", serde_json::to_value(cell)?)?;
    Ok(())
}

fn transfer(cfg: &RunConfig) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let spec = ExperimentSpec {
        tasks: cfg.transfer.tasks.clone(),
        strategies: cfg.transfer.strategies.clone(),
        gaps: cfg.transfer.gaps.clone(),
        episodes_per_cell: cfg.episodes,
        master_seed: cfg.seed,
    };
    let summary = run_experiment(&ctx, &spec)?;
    let mut run = RunDir::create(cfg, "transfer")?;
    run.write_csv("raw.csv", &RAW_HEADER, raw_rows(&summary))?;
    let header = [
        "task",
        "strategy",
        "gap_kind",
        "gap_level_fraction_or_n",
        "n",
        "return_mean",
        "return_std",
        "length_mean_steps",
        "length_std_steps",
        "errors",
    ];
    let rows = summary.cells.iter().map(|c| {
        vec![
            c.task.to_string(),
            c.strategy.to_string(),
            c.gap_kind.to_string(),
            num(c.gap_level),
            c.n.to_string(),
            num(c.return_mean),
            num(c.return_std),
            num(c.length_mean),
            num(c.length_std),
            c.errors.to_string(),
        ]
    });
    run.write_csv("summary.csv", &header, rows)?;
    for c in &summary.cells {
        println!(
            "{:<3} {:<8} {:<6} {:>7}  length {:>7.1} ± {:>6.1}  return {:>10.3} ± {:>8.3}",
            c.task,
            c.strategy,
            c.gap_kind,
            c.gap_level,
            c.length_mean,
            c.length_std,
            c.return_mean,
            c.return_std
        );
        if c.errors > 0 {
            run.warn(format!("{} {} {}: {} episodes failed with an error", c.task, c.strategy, c.gap_kind, c.errors));
        }
    }
    run.finish(cfg, "ok", json!({ "cells": summary.cells }))?;
    Ok(())
}

fn export(cfg: &RunConfig) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let mut run = RunDir::create(cfg, "export")?;
    let mut exported = Vec::new();
    for &strategy in &cfg.transfer.strategies {
        for ep in 0..cfg.episodes {
            let seed = episode_seed(cfg.seed, cfg.task, ep);
            let result = ctx.run_episode(cfg.task, strategy, &cfg.gap, seed, true)?;
            let name = format!("trace_{}_{strategy}_{ep}.csv", cfg.task);
            let rows = result.trace.iter().flatten().map(|r: &TraceRow| r.values().map(num).to_vec());
            run.write_csv(&name, &TRACE_HEADER, rows)?;
            exported.push(json!({
                "file": name,
                "strategy": strategy,
                "seed": seed,
                "length": result.length,
                "cause": result.cause,
            }));
        }
    }
    run.finish(cfg, "ok", json!({ "traces": exported }))?;
    Ok(())
}

fn controller_config(cfg: &RunConfig) -> ControllerConfig {
    ControllerConfig {
        look_ahead: cfg.scenario.look_ahead,
        ..cfg.rlrc.controller.clone()
    }
}

/// Nominal vehicle followed by the seeded perturbed samples.
fn vehicles(cfg: &RunConfig) -> Result<Vec<VehicleParams>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut all = vec![cfg.vehicle.clone()];
    all.extend(sample_plant_variations(&cfg.vehicle, cfg.analyze.bound, cfg.analyze.samples, &mut rng)?);
    Ok(all)
}

fn freq_rows(curves: &[Vec<(f64, f64, f64)>]) -> Vec<Vec<String>> {
    curves
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |&(w, m, p)| vec![i.to_string(), num(w), num(m), num(p)]))
        .collect()
}

fn write_vehicles(run: &mut RunDir, all: &[VehicleParams]) -> Result<(), CliError> {
    let header = ["curve", "a_m", "b_m", "m_kg", "iz_kg_m2", "pacejka_b", "pacejka_c", "pacejka_e", "mu"];
    let rows = all.iter().enumerate().map(|(i, p)| {
        let mut row = vec![i.to_string()];
        row.extend([p.a, p.b, p.m, p.iz, p.pacejka_b, p.pacejka_c, p.pacejka_e, p.mu].map(num));
        row
    });
    run.write_csv("vehicles.csv", &header, rows)
}

fn analyze(kind: AnalyzeKind, cfg: &RunConfig) -> Result<(), CliError> {
    let a = &cfg.analyze;
    let ctrl_cfg = controller_config(cfg);
    let omegas = log_grid(a.omega_min, a.omega_max, a.omega_points);
    let command = match kind {
        AnalyzeKind::Bode => "analyze-bode",
        AnalyzeKind::Step => "analyze-step",
        AnalyzeKind::Sweep => "analyze-sweep",
        AnalyzeKind::Sensitivity => "analyze-sensitivity",
    };
    let mut run = RunDir::create(cfg, command)?;
    let results: Value = match kind {
        AnalyzeKind::Bode => {
            let all = vehicles(cfg)?;
            let curves = bode_samples(&all, a.vx, ctrl_cfg.look_ahead, &omegas)?;
            write_vehicles(&mut run, &all)?;
            run.write_csv("bode.csv", &FREQ_HEADER, freq_rows(&curves))?;
            json!({ "curves": curves.len(), "nominal_curve": 0 })
        }
        AnalyzeKind::Step => {
            let plant = linear_model(&cfg.vehicle, a.vx, ctrl_cfg.look_ahead)?;
            let n = (a.step_duration / cfg.vehicle.dt).round() as usize;
            let mut rows = Vec::new();
            let mut finals = serde_json::Map::new();
            for dob in [true, false] {
                let ctrl = build_controller(&cfg.vehicle, &ControllerConfig { dob_enabled: dob, ..ctrl_cfg.clone() })?;
                let lp = LinearLoop::new(&plant, ctrl);
                if lp.spectral_radius() >= 1.0 {
                    run.warn(format!("closed loop with dob={dob} is unstable (radius {})", lp.spectral_radius()));
                }
                let samples = lp.curvature_step(a.step_kappa, n);
                if let Some(last) = samples.last() {
                    finals.insert(format!("final_dy_s_dob_{}", if dob { "on" } else { "off" }), json!(last.dy_s));
                }
                rows.extend(
                    samples
                        .iter()
                        .map(|s| vec![(dob as u8).to_string(), num(s.t), num(s.dy_s), num(s.dpsi_s)]),
                );
            }
            run.write_csv("step.csv", &["dob", "t_s", "dy_s_m", "dpsi_s_rad"], rows)?;
            Value::Object(finals)
        }
        AnalyzeKind::Sweep => {
            let mut rows = Vec::new();
            for &k2 in &ctrl_cfg.k2_grid {
                for &vx in &ctrl_cfg.sweep_speeds {
                    let radius = nominal_loop(&cfg.vehicle, vx, &ctrl_cfg, k2)?.max_pole_radius();
                    rows.push(vec![num(k2), num(vx), num(radius)]);
                }
            }
            run.write_csv("sweep.csv", &["k2_rad_per_m", "vx_m_s", "max_pole_radius"], rows)?;
            match feedback_gains(&cfg.vehicle, &ctrl_cfg, &ctrl_cfg.k2_grid, &ctrl_cfg.sweep_speeds) {
                Ok(d) => json!({ "largest_stable_k2": d.k2, "k1": d.k1, "configured_k2": ctrl_cfg.k2 }),
                Err(e) => {
                    run.warn(e.to_string());
                    json!({ "largest_stable_k2": null, "configured_k2": ctrl_cfg.k2 })
                }
            }
        }
        AnalyzeKind::Sensitivity => {
            let ctrl = build_controller(&cfg.vehicle, &ctrl_cfg)?;
            let all = vehicles(cfg)?;
            let mut curves = Vec::with_capacity(all.len());
            let mut unstable = 0;
            for p in &all {
                let gv = steering_path_tf(&linear_model(p, a.vx, ctrl_cfg.look_ahead)?, ctrl_cfg.actuator_delay)?;
                let s = ctrl.sensitivity(&gv)?.to_tf()?;
                if !s.is_stable() {
                    unstable += 1;
                }
                curves.push(s.frequency_response(&omegas, cfg.vehicle.dt));
            }
            if unstable > 0 {
                run.warn(format!("{unstable} of {} loops are unstable", all.len()));
            }
            write_vehicles(&mut run, &all)?;
            run.write_csv("sensitivity.csv", &FREQ_HEADER, freq_rows(&curves))?;
            json!({ "curves": curves.len(), "unstable": unstable, "dob_enabled": ctrl.dob_enabled() })
        }
    };
    let dir = run.finish(cfg, "ok", results)?;
    println!("{}", dir.display());
    Ok(())
}
