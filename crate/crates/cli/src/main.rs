use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stiffonet::commands::{self, Context, Overrides};
use stiffonet::config::LoadedConfig;
use stiffonet_core::Error;

#[derive(Parser)]
#[command(
    name = "stiffonet",
    version,
    about = "DeepONet surrogates for a 2D frame lattice"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed override
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lattice FEM model
    GenModel(Common),
    /// Solve load cases and write the dataset
    GenData(Common),
    /// Train a DeepONet
    Train(Common),
    /// Evaluate a trained model on the test split
    Eval(Common),
    /// Run the parametric study
    Study(Common),
}

fn threads() -> Result<usize, Error> {
    match std::env::var("STIFFONET_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("STIFFONET_THREADS: invalid value {v:?}"))),
        Err(_) => Ok(1),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (cmd, common) = match &cli.command {
        Command::GenModel(c) => ("gen-model", c),
        Command::GenData(c) => ("gen-data", c),
        Command::Train(c) => ("train", c),
        Command::Eval(c) => ("eval", c),
        Command::Study(c) => ("study", c),
    };
    let cfg = LoadedConfig::load(&common.config)?;
    let ctx = Context::new(
        cfg,
        Overrides {
            out: common.out.clone(),
            seed: common.seed,
            threads: threads()?,
        },
    );
    match cmd {
        "gen-model" => commands::gen_model(&ctx).map(drop),
        "gen-data" => commands::gen_data(&ctx).map(drop),
        "train" => commands::train(&ctx).map(drop),
        "eval" => commands::eval(&ctx).map(drop),
        _ => commands::study(&ctx).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}
