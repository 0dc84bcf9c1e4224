use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mppt", version, about = "PV maximum power point tracking simulator")]
pub struct Cli {
    /// TOML run configuration. Flags override values from the file.
    #[arg(long, global = true, env = "MPPT_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one controller over a scenario and write its trace and metrics.
    Simulate(SimulateArgs),
    /// Generate the MPP dataset and train the voltage and current networks.
    Train(TrainArgs),
    /// Run several controllers on the same scenario and tabulate the metrics.
    Compare(CompareArgs),
    /// Write I-V curves and the MPP locus over a grid of conditions.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Where trained networks are stored (default: <output-dir>/models).
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// cpoa, ampo or ampo_ann.
    #[arg(long)]
    pub controller: Option<String>,
    /// stc or step_irradiance. Replaces any scenario from the config file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Also drive the three-phase inverter from the converter output.
    #[arg(long)]
    pub inverter: bool,
    /// Train and store the networks when ampo_ann finds none.
    #[arg(long)]
    pub train_if_missing: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated controller list.
    #[arg(long, default_value = "cpoa,ampo,ampo_ann")]
    pub controllers: String,
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// `g_min:g_max:n,t_min:t_max:n` with temperatures in °C.
    #[arg(long, default_value = "200:1000:5,25:25:1")]
    pub grid: String,
    /// Samples per I-V curve.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}
