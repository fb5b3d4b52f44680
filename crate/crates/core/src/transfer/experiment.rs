//! Experiment matrices over tasks, strategies, and gap levels.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::policy::GaussianPolicy;
use crate::scenario::{Env, Road, ScenarioConfig, Task, TerminationCause};
use crate::transfer::episode::{run_baseline, EpisodeResult, RlrcAgent, RlrcConfig};
use crate::transfer::gap::{GapKind, ModelingGap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Rlrc,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Baseline, Strategy::Rlrc];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::Rlrc => "rlrc",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Strategy::Baseline),
            "rlrc" | "rl-rc" => Ok(Strategy::Rlrc),
            other => Err(Error::invalid("strategy", format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub tasks: Vec<Task>,
    pub strategies: Vec<Strategy>,
    pub gaps: Vec<ModelingGap>,
    pub episodes_per_cell: usize,
    pub master_seed: u64,
}

/// Shared inputs of every episode. Target vehicles are derived from
/// `nominal` by each gap; the RL-RC agent only ever sees `nominal`.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub policy: Arc<GaussianPolicy>,
    pub nominal: VehicleParams,
    pub scenario: Arc<ScenarioConfig>,
    pub road: Arc<Road>,
    pub rlrc: RlrcConfig,
}

impl ExperimentContext {
    pub fn new(policy: Arc<GaussianPolicy>, nominal: VehicleParams, scenario: ScenarioConfig, rlrc: RlrcConfig) -> Result<Self> {
        scenario.validate()?;
        let road = Arc::new(Road::sinusoidal(&scenario.lanes)?);
        Ok(Self {
            policy,
            nominal,
            scenario: Arc::new(scenario),
            road,
            rlrc,
        })
    }

    /// Target environment of one seeded episode, already reset.
    pub fn target_env(&self, task: Task, gap: &ModelingGap, seed: u64) -> Result<Env> {
        // Separate streams keep the initial conditions independent of the gap.
        let mut gap_rng = ChaCha8Rng::seed_from_u64(seed);
        gap_rng.set_stream(1);
        let (params, force) = gap.realize(&self.nominal, &mut gap_rng)?;
        let mut env = Env::new(self.road.clone(), self.scenario.clone(), task, params, force)?;
        env.reset(&mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(env)
    }

    pub fn rlrc_agent(&self, task: Task) -> Result<RlrcAgent> {
        RlrcAgent::new(
            self.policy.clone(),
            self.road.clone(),
            self.scenario.clone(),
            task,
            &self.nominal,
            self.rlrc.clone(),
        )
    }

    pub fn run_episode(&self, task: Task, strategy: Strategy, gap: &ModelingGap, seed: u64, record: bool) -> Result<EpisodeResult> {
        let mut env = self.target_env(task, gap, seed)?;
        match strategy {
            Strategy::Baseline => run_baseline(&mut env, self.policy.clone(), self.rlrc.detector, record),
            Strategy::Rlrc => self.rlrc_agent(task)?.run(&mut env, record),
        }
    }
}

/// SplitMix64 mixing of the master seed with the episode coordinates.
/// Strategy and gap level are excluded: every cell of a task sees the same
/// initial conditions and perturbation directions, which makes comparisons
/// across cells paired.
pub fn episode_seed(master: u64, task: Task, episode: usize) -> u64 {
    let task_id = Task::ALL.iter().position(|t| *t == task).unwrap_or(0) as u64;
    let mut z = master
        ^ task_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (episode as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub task: Task,
    pub strategy: Strategy,
    pub gap_kind: GapKind,
    pub gap_level: f64,
    pub seed: u64,
    pub length: usize,
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub task: Task,
    pub strategy: Strategy,
    pub gap_kind: GapKind,
    pub gap_level: f64,
    pub n: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub length_mean: f64,
    pub length_std: f64,
    /// Episodes that failed with an error instead of a termination cause.
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub cells: Vec<CellSummary>,
    pub raw: Vec<RawRow>,
}

impl ExperimentSummary {
    pub fn cell(&self, task: Task, strategy: Strategy, gap: &ModelingGap) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.task == task && c.strategy == strategy && c.gap_kind == gap.kind && c.gap_level == gap.level)
    }
}

/// Sample mean and standard deviation with the `N - 1` denominator; the
/// deviation is 0 for fewer than two samples or identical samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    // Identical samples report exactly zero spread despite rounding in `mean`.
    if n < 2 || xs.iter().all(|x| *x == xs[0]) {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn run_experiment(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    for gap in &spec.gaps {
        gap.validate()?;
    }
    let mut jobs = Vec::new();
    for &task in &spec.tasks {
        for gap in &spec.gaps {
            for &strategy in &spec.strategies {
                for ep in 0..spec.episodes_per_cell {
                    jobs.push((task, strategy, *gap, episode_seed(spec.master_seed, task, ep)));
                }
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(task, strategy, gap, seed)| ctx.run_episode(task, strategy, &gap, seed, false))
        .collect();

    let mut raw = Vec::with_capacity(jobs.len());
    let mut cells = Vec::new();
    for (chunk_jobs, chunk_res) in jobs
        .chunks(spec.episodes_per_cell.max(1))
        .zip(results.chunks(spec.episodes_per_cell.max(1)))
    {
        let (task, strategy, gap, _) = chunk_jobs[0];
        let mut returns = Vec::new();
        let mut lengths = Vec::new();
        let mut errors = 0;
        for (&(_, _, _, seed), res) in chunk_jobs.iter().zip(chunk_res) {
            let (length, ret, und, cause) = match res {
                Ok(r) => (r.length, r.discounted_return, r.undiscounted_return, r.cause.to_string()),
                Err(e) => {
                    errors += 1;
                    (0, f64::NAN, f64::NAN, format!("error: {e}"))
                }
            };
            if res.is_ok() {
                returns.push(ret);
                lengths.push(length as f64);
            }
            raw.push(RawRow {
                task,
                strategy,
                gap_kind: gap.kind,
                gap_level: gap.level,
                seed,
                length,
                discounted_return: ret,
                undiscounted_return: und,
                cause,
            });
        }
        let (return_mean, return_std) = mean_std(&returns);
        let (length_mean, length_std) = mean_std(&lengths);
        cells.push(CellSummary {
            task,
            strategy,
            gap_kind: gap.kind,
            gap_level: gap.level,
            n: returns.len(),
            return_mean,
            return_std,
            length_mean,
            length_std,
            errors,
        });
    }
    Ok(ExperimentSummary { cells, raw })
}

/// Whether every episode of a cell reached the horizon.
pub fn all_completed(summary: &ExperimentSummary, cell: &CellSummary) -> bool {
    summary
        .raw
        .iter()
        .filter(|r| r.task == cell.task && r.strategy == cell.strategy && r.gap_kind == cell.gap_kind && r.gap_level == cell.gap_level)
        .all(|r| r.cause == TerminationCause::Horizon.to_string())
}
