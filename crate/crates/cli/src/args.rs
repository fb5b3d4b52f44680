use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rlrc_core::scenario::Task;
use rlrc_core::transfer::{GapKind, Strategy};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "rlrc", version, about = "Train lane-tracking policies and transfer them to perturbed vehicles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the lane-tracking policy with PPO on the nominal vehicle.
    Train,
    /// Run deterministic episodes of one task and strategy.
    Evaluate,
    /// Run the task x strategy x gap experiment matrix.
    Transfer,
    /// Linear analysis of the tracking loop.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeKind,
    },
    /// Write per-step episode traces.
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeKind {
    /// Frequency responses of the nominal and perturbed vehicles.
    Bode,
    /// Previewed-curvature step response with and without the observer.
    Step,
    /// Closed-loop pole radius over the gain and speed grids.
    Sweep,
    /// Sensitivity of the tracking loop on nominal and perturbed vehicles.
    Sensitivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory. Defaults to a directory under $RLRC_OUT_DIR (or ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// lk, lc or oa.
    #[arg(long, global = true)]
    pub task: Option<Task>,
    /// baseline or rlrc.
    #[arg(long, global = true)]
    pub strategy: Option<Strategy>,
    /// none, params or force.
    #[arg(long, global = true)]
    pub gap: Option<GapKind>,
    /// Variation bound (fraction) or side force (N).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gap_level: Option<f64>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub dob: Option<Switch>,
    /// Policy checkpoint to load; train resumes from it.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            task: self.task,
            strategy: self.strategy,
            episodes: self.episodes,
            out_dir: self.out.clone(),
            checkpoint: self.checkpoint.clone(),
            gap: self.gap,
            gap_level: self.gap_level,
            dob: self.dob.map(|s| s == Switch::On),
        }
    }
}
