use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gelo::cli::{cmd_eval, cmd_gelo, cmd_rate, cmd_simulate, CommandOutput, RunConfig};

#[derive(Parser)]
#[command(name = "gelo", version, about = "Elo and GElo ratings from match histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elo replay over a match file
    Rate(RunArgs),
    /// Elo plus embedding-based adjustment
    Gelo(RunArgs),
    /// Windowed Elo versus GElo evaluation
    Eval(RunArgs),
    /// Generate a synthetic match file from a spec file
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    matches: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Single-threaded, reproducible embedding training (the default)
    #[arg(long, conflicts_with = "parallel")]
    deterministic: bool,
    /// Lock-free multi-threaded embedding training
    #[arg(long)]
    parallel: bool,
}

impl RunArgs {
    fn config(&self) -> gelo::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        if self.parallel {
            cfg.deterministic = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> gelo::Result<CommandOutput> {
    match cli.command {
        Command::Rate(a) => cmd_rate(&a.matches, &a.config()?, &a.out),
        Command::Gelo(a) => Ok(cmd_gelo(&a.matches, &a.config()?, &a.out)?.0),
        Command::Eval(a) => Ok(cmd_eval(&a.matches, &a.config()?, &a.out)?.0),
        Command::Simulate { spec, seed, out } => cmd_simulate(&spec, seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(output) => {
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            for f in &output.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
