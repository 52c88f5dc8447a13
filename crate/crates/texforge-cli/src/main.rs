//! texforge: forge paired fabric-texture data, train the diffusion texture
//! normalizer, and post-process its outputs into prints and tiled textures.
//!
//! Conventions shared by every subcommand: the fully resolved configuration
//! (seed included) is echoed to stdout as one JSON line before anything
//! happens, progress goes to stderr while machine-readable results go to
//! stdout, and the output root is held under a lockfile for the duration of
//! the run. `TEXFORGE_THREADS` caps internal parallelism. Exit codes:
//! 0 success, 2 usage error, 3 data/validation error, 4 numerical failure.

mod commands;
mod config;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "texforge", version, about = "Fabric texture forging, normalization, and tiling")]
struct Cli {
    /// Pipeline config JSON; unset fields take built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output root (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forge paired dataset splits from procedural materials.
    Forge(commands::forge::ForgeArgs),
    /// Train the texture normalizer on a forged split.
    Train(commands::train::TrainArgs),
    /// Normalize one garment capture with a trained checkpoint.
    Infer(commands::infer::InferArgs),
    /// Tile a texture by explicit or mask-estimated repeats.
    Tile(commands::tile::TileArgs),
    /// Score a checkpoint against a test split.
    Eval(commands::eval::EvalArgs),
    /// Render a material on a garment next to its flat reference.
    Render(commands::render::RenderArgs),
}

/// Apply `TEXFORGE_THREADS` before any parallel work starts.
fn init_thread_cap() -> CliResult<()> {
    let Ok(raw) = std::env::var("TEXFORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage(format!("TEXFORGE_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Lib(texforge::Error::invalid(format!("thread pool: {e}"))))
}

fn run(cli: Cli) -> CliResult<()> {
    init_thread_cap()?;
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Forge(args) => commands::forge::run(cfg, args),
        Command::Train(args) => commands::train::run(cfg, args),
        Command::Infer(args) => commands::infer::run(cfg, args),
        Command::Tile(args) => commands::tile::run(cfg, args),
        Command::Eval(args) => commands::eval::run(cfg, args),
        Command::Render(args) => commands::render::run(cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit clean; everything
            // else is a usage error.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
