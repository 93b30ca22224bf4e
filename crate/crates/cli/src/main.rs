//! `robotgpt`: difficulty scores, demonstration generation, training and evaluation.
//!
//! Exit codes: 0 ok, 1 usage, 2 runtime failure, 3 external service.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod review;

#[derive(Parser, Debug)]
#[command(name = "robotgpt", version, about = "LLM-written robot programs as demonstrations for an offline learner")]
pub struct Cli {
    /// Configuration file (key = value). Falls back to $ROBOTGPT_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for harvesting and evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Difficulty score and band of a task or of raw counts.
    Score(ScoreArgs),
    /// Demonstrations from LLM-written programs through the correction loop.
    GenDemos(GenDemosArgs),
    /// Demonstrations from the built-in expert planner.
    ExpertDemos(ExpertDemosArgs),
    /// Train a Q-network on stored demonstrations.
    Train(TrainArgs),
    /// Greedy rollouts of a trained network on seeded scenes.
    Eval(EvalArgs),
    /// Run a program file on a scene file and print the trace.
    DslRun(DslRunArgs),
    /// Print the transitions of a stored episode.
    Replay(ReplayArgs),
    /// Generate a task scene, or load and check one.
    Scene(SceneArgs),
    /// Print every configuration key with its effective value.
    ShowConfig,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long, conflicts_with_all = ["objects", "table"])]
    pub task: Option<String>,
    #[arg(long, allow_negative_numbers = true, requires_all = ["categories", "steps"], conflicts_with = "table")]
    pub objects: Option<i64>,
    #[arg(long, allow_negative_numbers = true, requires = "objects")]
    pub categories: Option<i64>,
    #[arg(long, allow_negative_numbers = true, requires = "objects")]
    pub steps: Option<i64>,
    /// All eight tasks.
    #[arg(long)]
    pub table: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BotKind {
    Live,
    Scripted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReviewKind {
    Auto,
    Interactive,
}

#[derive(Args, Debug)]
pub struct GenDemosArgs {
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 25)]
    pub episodes: u64,
    /// First scene seed; episodes use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = BotKind::Scripted)]
    pub bot: BotKind,
    /// Transcript directory for the scripted bot (default: paths.fixtures).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Also record live transcripts in the scripted layout under this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Demo store directory (default: paths.demos).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReviewKind::Auto)]
    pub review: ReviewKind,
}

#[derive(Args, Debug)]
pub struct ExpertDemosArgs {
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 100)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Demo store directory (default: paths.demos).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: String,
    /// Demo store directory (default: paths.demos).
    #[arg(long)]
    pub demos: Option<PathBuf>,
    /// Checkpoint path (default: paths.models/<task>.qnet).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides learner.steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides learner.seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 25)]
    pub episodes: u64,
    /// First evaluation seed.
    #[arg(long, default_value_t = 1000)]
    pub seed: u64,
    /// Allow actions that contradict the gripper state.
    #[arg(long)]
    pub no_mask: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ApiKind {
    Actor,
    Query,
}

#[derive(Args, Debug)]
pub struct DslRunArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Scene JSON.
    #[arg(long)]
    pub scene: PathBuf,
    /// Task for the oracle check (default: inferred from the scene's objects).
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_enum, default_value_t = ApiKind::Actor)]
    pub api: ApiKind,
    /// Write the final scene here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Store file or directory (default: paths.demos).
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Episode index within the store.
    #[arg(long, default_value_t = 0)]
    pub episode: usize,
    /// Print heightmaps as ASCII.
    #[arg(long)]
    pub ascii: bool,
    /// Write heightmaps as PGM images into this directory.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SceneArgs {
    #[arg(long, required_unless_present = "load")]
    pub task: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the scene JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Load and validate a scene file instead of generating one.
    #[arg(long, conflicts_with_all = ["task", "out"])]
    pub load: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
