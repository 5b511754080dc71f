use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grasp::pipeline::{
    plot_traces, run_pipeline, FitnessMode, Group, PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "grasp",
    version,
    about = "Generate, reduce and select few-shot demonstrations"
)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, short, global = true, default_value = "grasp.toml")]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the fitness mode (llm or surrogate).
    #[arg(long, global = true)]
    fitness: Option<FitnessMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the candidate pool (or import a ready-made one).
    Generate,
    /// Split, embed, project, cluster and build the per-k pools.
    Reduce,
    /// Run the genetic search for every pool size.
    Select,
    /// Score the selected prompts on the held-out test set.
    Evaluate,
    /// Random-draw baselines, plus zero-shot in llm mode.
    Baseline,
    /// Every stage, resuming where the last run stopped.
    RunAll,
    /// Draw SVG charts from the trace files.
    Plot,
}

fn load(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.output_dir =
            std::path::absolute(out).map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.fitness {
        cfg.fitness = mode;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load(cli)?;
    let groups: &[Group] = match cli.command {
        Command::Generate => &[Group::Generate],
        Command::Reduce => &[Group::Reduce],
        Command::Select => &[Group::Select],
        Command::Evaluate => {
            if cfg.fitness != FitnessMode::Llm || cfg.data.test.is_none() {
                log::warn!("evaluation needs llm fitness and data.test; nothing to evaluate");
            }
            &[Group::Evaluate]
        }
        Command::Baseline => &[Group::Baseline],
        Command::RunAll => &Group::ALL,
        Command::Plot => {
            for path in plot_traces(&cfg)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
    };
    let manifest = run_pipeline(&cfg, groups)?;
    for s in &manifest.stages {
        println!(
            "{:<20} {}",
            s.name,
            if s.complete { "complete" } else { "incomplete" }
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
