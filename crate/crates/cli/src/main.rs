//! `labsim`: scene generation, demonstration collection, benchmark
//! evaluation, navigation planning, chemistry queries and replay.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "labsim", version, about = "Symbolic laboratory simulator and benchmark")]
pub struct Cli {
    /// Emit a single JSON document on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for episode batches.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scene layout generation.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Record scripted demonstrations into a dataset directory.
    Collect(CollectArgs),
    /// Evaluate a policy on benchmark tasks.
    Eval(EvalArgs),
    /// Navigation planning.
    #[command(subcommand)]
    Nav(NavCmd),
    /// Chemistry queries.
    #[command(subcommand)]
    Chem(ChemCmd),
    /// Re-simulate a recorded episode and check it frame by frame.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCmd {
    /// Place a catalog in a room and write scene.json plus its occupancy map.
    Gen(SceneGenArgs),
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Asset catalog (assets.json); the shipped catalog by default.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Substance database used for the world snapshot.
    #[arg(long)]
    pub substances: Option<PathBuf>,
    /// Room size as WIDTH,DEPTH in metres.
    #[arg(long, value_parser = parse_pair)]
    pub room: Option<[f64; 2]>,
    /// Candidates scored per asset.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub w_edge: Option<f64>,
    #[arg(long)]
    pub w_dist: Option<f64>,
    #[arg(long)]
    pub w_orient: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[arg(long)]
    pub task: String,
    /// Number of episodes (seeds SEED..SEED+N).
    #[arg(short = 'n', long = "episodes")]
    pub episodes: Option<u64>,
    /// Dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write episodes whose task failed.
    #[arg(long)]
    pub keep_failures: bool,
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[arg(long)]
    pub substances: Option<PathBuf>,
    #[arg(long)]
    pub reactions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Task id; repeatable.
    #[arg(long)]
    pub task: Vec<String>,
    /// Every task of this level.
    #[arg(long)]
    pub level: Vec<u8>,
    /// Every task in the registry.
    #[arg(long)]
    pub all: bool,
    /// `scripted`, `null` or `replay:<episode file>`.
    #[arg(long, default_value = "scripted")]
    pub policy: String,
    /// Episodes per task.
    #[arg(short = 'n', long = "episodes")]
    pub episodes: Option<u64>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail (exit 1) when any task's success rate is below this.
    /// Defaults to 1.0 for the scripted policy and no gate otherwise.
    #[arg(long)]
    pub min_success: Option<f64>,
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[arg(long)]
    pub substances: Option<PathBuf>,
    #[arg(long)]
    pub reactions: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum NavCmd {
    /// Shortest safe path on an occupancy map.
    Plan(NavPlanArgs),
}

#[derive(Debug, Args)]
pub struct NavPlanArgs {
    /// PGM occupancy map, or `demo` for the shipped 20x20 floor.
    #[arg(long, default_value = "demo")]
    pub map: String,
    /// JSON map header; defaults to the map path with a .json extension.
    #[arg(long)]
    pub header: Option<PathBuf>,
    /// Start as X,Y in metres.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub from: [f64; 2],
    /// Goal as X,Y in metres.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub to: [f64; 2],
    /// Collision radius for inflation, metres.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ChemCmd {
    /// Mix substances and let them react to completion.
    Mix(ChemMixArgs),
}

#[derive(Debug, Args)]
pub struct ChemMixArgs {
    /// Components as ID=AMOUNT (id or formula, case-insensitive).
    #[arg(required = true)]
    pub components: Vec<String>,
    /// Read amounts as millilitres instead of moles.
    #[arg(long)]
    pub ml: bool,
    #[arg(long)]
    pub substances: Option<PathBuf>,
    #[arg(long)]
    pub reactions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Episode file (.ep.jsonl), or `demo` for the shipped episode.
    pub episode: String,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([a.parse().map_err(|e| format!("{a}: {e}"))?, b.parse().map_err(|e| format!("{b}: {e}"))?]),
        _ => Err(format!("expected X,Y, got `{s}`")),
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input files.
    Usage(String),
    /// Missing files, unwritable directories, unreachable services.
    Env(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Env(m) => write!(f, "{m}"),
        }
    }
}

/// A finished command: what to print, and whether a check failed.
pub struct Outcome {
    pub json: serde_json::Value,
    pub text: String,
    pub failure: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
    .and_then(|cfg| commands::run(&cli, &cfg));
    match result {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("output serializes"));
            } else {
                print!("{}", out.text);
            }
            match out.failure {
                Some(why) => {
                    eprintln!("labsim: {why}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            }
            eprintln!("labsim: {e}");
            ExitCode::from(2)
        }
    }
}
