//! `netdp`: experiments over private gossip averaging, exact pairwise
//! privacy accounting, and decentralized optimization, as subcommands.
//!
//! Every run is deterministic given `--seed` and writes its resolved
//! configuration next to its results. Exit codes: 0 success, 2
//! configuration error, 3 runtime error.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::CliError;

#[derive(Parser)]
#[command(name = "netdp", version, about = "Private gossip averaging: simulation and accounting")]
struct Cli {
    /// Base seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing). Defaults to ./netdp-out.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Declarative TOML config; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a communication graph and write it out.
    Graph(commands::graph::Args),
    /// Simulate noisy averaging (synchronous or randomized).
    Average(commands::average::Args),
    /// Exact pairwise privacy accounting for a protocol run.
    Account(commands::account::Args),
    /// Decentralized private optimization on a dataset.
    Optimize(commands::optimize::Args),
    /// Availability-dropout experiment with time-varying graphs.
    Dropout(commands::dropout::Args),
}

fn main() {
    let cli = Cli::parse();
    let global = match config::Global::resolve(cli.seed, cli.out, cli.config.as_deref()) {
        Ok(g) => g,
        Err(e) => fail(e),
    };
    let result = match cli.command {
        Command::Graph(args) => commands::graph::run(args, &global),
        Command::Average(args) => commands::average::run(args, &global),
        Command::Account(args) => commands::account::run(args, &global),
        Command::Optimize(args) => commands::optimize::run(args, &global),
        Command::Dropout(args) => commands::dropout::run(args, &global),
    };
    if let Err(e) = result {
        fail(e);
    }
}

fn fail(e: CliError) -> ! {
    match e {
        CliError::Config(msg) => {
            eprintln!("configuration error: {msg}");
            std::process::exit(2);
        }
        CliError::Runtime(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(3);
        }
    }
}
