use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use robinsim::harness::{emit_config, parse_config, run_experiment, Engine};
use robinsim::parallel::with_workers;
use robinsim::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Analytic,
    Sim1d,
    Simnd,
    Fpe,
    Blcheck,
    Convergence,
}

impl Command {
    fn engine(self) -> Engine {
        match self {
            Command::Analytic => Engine::Analytic,
            Command::Sim1d => Engine::Sim1d,
            Command::Simnd => Engine::SimNd,
            Command::Fpe => Engine::Fpe,
            Command::Blcheck => Engine::Blcheck,
            Command::Convergence => Engine::Convergence,
        }
    }
}

/// Euler simulation of diffusion with a partially reflecting boundary,
/// with closed-form and Fokker-Planck references.
#[derive(Debug, Parser)]
#[command(version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("ROBINSIM_GIT_DESCRIBE"), ")"))]
struct Cli {
    command: Command,
    /// Experiment file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `out` in the file, then `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ensemble runs.
    #[arg(long)]
    workers: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Domain(_) | Error::Numeric(_) => 3,
        Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let has_engine = text.lines().any(|l| {
        l.split('#')
            .next()
            .unwrap_or("")
            .trim_start()
            .starts_with("engine")
    });
    let text = if has_engine {
        text
    } else {
        format!("{text}\nengine = {}\n", cli.command.engine().name())
    };
    let mut cfg = parse_config(&text)?;
    cfg.engine = cli.command.engine();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    // re-validate the engine-specific keys after the override
    let cfg = parse_config(&emit_config(&cfg))?;
    let out = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment));
    let files = with_workers(cli.workers, || run_experiment(&cfg, &out))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robinsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
