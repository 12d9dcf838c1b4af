//! Command-line surface for the garment-pile retrieval stack.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 incomplete run (generation/collection gave up within its budget).

mod commands;
mod config;
mod ply;
mod report;

use clap::{Parser, Subcommand};

use rummage_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "rummage", version, about = "Deterministic garment-pile retrieval: simulate, train, evaluate")]
struct Cli {
    /// Path to a TOML run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<String>,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate settled scenes and write their snapshots.
    GenScenes {
        #[arg(long, default_value_t = 10)]
        count: u32,
        #[arg(long, default_value = "sofa")]
        scenario: String,
    },
    /// Collect retrieval labels by direct execution.
    CollectRetrieve {
        #[arg(long, default_value_t = 2000)]
        count: usize,
    },
    /// Collect place labels (requires a trained retrieval checkpoint).
    CollectPlace {
        #[arg(long)]
        retrieval: String,
        #[arg(long, default_value_t = 800)]
        count: usize,
    },
    /// Collect pick labels (requires retrieval and place checkpoints).
    CollectPick {
        #[arg(long)]
        retrieval: String,
        #[arg(long)]
        place: String,
        #[arg(long, default_value_t = 800)]
        count: usize,
    },
    /// Train one module from a dataset.
    Train {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        dataset: String,
    },
    /// Online fine-tuning from inference-time failures.
    OnlineTune {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        model: String,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        retrieval: Option<String>,
        #[arg(long)]
        place: Option<String>,
        #[arg(long)]
        iterations: Option<u32>,
    },
    /// Evaluate a policy (or ablation/baseline) over seeded scenes.
    Eval {
        #[arg(long)]
        retrieval: String,
        #[arg(long)]
        place: Option<String>,
        #[arg(long)]
        pick: Option<String>,
        #[arg(long, default_value = "sofa")]
        scenario: String,
        #[arg(long, default_value_t = 100)]
        scenes: u32,
        /// none | no-adapt | no-pick | no-place | random | highest
        #[arg(long, default_value = "none")]
        ablation: String,
    },
    /// Success rate across adaptation-round caps 0..3 plus 3-random.
    SweepRounds {
        #[arg(long)]
        retrieval: String,
        #[arg(long)]
        place: String,
        #[arg(long)]
        pick: String,
        #[arg(long, default_value = "sofa")]
        scenario: String,
        #[arg(long, default_value_t = 60)]
        scenes: u32,
        /// Keep only scenes whose initial high-score fraction is at or
        /// below this gate (the entangled suite).
        #[arg(long)]
        max_p_high: Option<f64>,
    },
    /// Ground-truth success set over the first candidate indices of a scene.
    Oracle {
        #[arg(long, default_value = "sofa")]
        scenario: String,
        #[arg(long)]
        scene_seed: u64,
        #[arg(long, default_value_t = 32)]
        candidates: usize,
    },
    /// Export an affordance map as ASCII PLY.
    ExportAffordance {
        #[arg(long)]
        retrieval: String,
        #[arg(long, default_value = "sofa")]
        scenario: String,
        #[arg(long)]
        scene_seed: u64,
        #[arg(long)]
        out_file: String,
    },
    /// Run and print one policy episode.
    RunEpisode {
        #[arg(long)]
        retrieval: String,
        #[arg(long)]
        place: String,
        #[arg(long)]
        pick: String,
        #[arg(long, default_value = "sofa")]
        scenario: String,
        #[arg(long)]
        scene_seed: u64,
    },
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::InvalidParameter(_)
            | CoreError::Format(_)
            | CoreError::NetInput(_)
            | CoreError::UnusableDataset(_)
            | CoreError::Config(_) => 2,
            CoreError::NumericalDivergence { .. } | CoreError::NonFiniteTensor { .. } => 3,
            CoreError::SceneGeneration { .. }
            | CoreError::ClassStarvation { .. }
            | CoreError::EmptyObservation => 4,
        };
    }
    2
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err));
        }
    }
}

pub(crate) use {Cli as CliArgs, Command as CliCommand};
