//! Command-line front end: reads a TOML run configuration, runs one pipeline and writes
//! its CSV/JSON files into the output directory.
//!
//! Exit codes: 0 success (numerical diagnostic failures included), 2 configuration
//! error, 3 I/O error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use henon_qh::config::RunConfig;
use henon_qh::output::write_file;
use henon_qh::report::{run, Subcommand};
use henon_qh::Execution;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Saddles,
    Green,
    Uniformize,
    FamilyReport,
    Growth,
    LocalDisks,
    Intersections,
    TangencyReport,
    Stratify,
    QhReport,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Saddles => Subcommand::Saddles,
            Command::Green => Subcommand::Green,
            Command::Uniformize => Subcommand::Uniformize,
            Command::FamilyReport => Subcommand::FamilyReport,
            Command::Growth => Subcommand::Growth,
            Command::LocalDisks => Subcommand::LocalDisks,
            Command::Intersections => Subcommand::Intersections,
            Command::TangencyReport => Subcommand::TangencyReport,
            Command::Stratify => Subcommand::Stratify,
            Command::QhReport => Subcommand::QhReport,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "henon-qh", version, about = "Quasi-hyperbolicity diagnostics for complex Hénon maps")]
struct Cli {
    /// Pipeline to run.
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `out` from the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, value_name = "N", env = "HENON_QH_JOBS")]
    jobs: Option<usize>,
    /// Seed for randomized perturbation directions, overriding `seed` from the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let exec = match cli.jobs {
        Some(0) => {
            eprintln!("config error: --jobs must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    let cmd: Subcommand = cli.command.into();
    let output = match cli.jobs {
        Some(n) if n > 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cmd, &cfg, exec)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::from(EXIT_IO);
            }
        },
        _ => run(cmd, &cfg, exec),
    };
    for a in &output.artifacts {
        let path = cfg.out.join(&a.name);
        if let Err(e) = write_file(&path, &a.contents) {
            eprintln!("I/O error: {}: {e}", path.display());
            return ExitCode::from(EXIT_IO);
        }
        println!("{}", path.display());
    }
    for f in &output.failures {
        eprintln!("diagnostic failure: {f}");
    }
    ExitCode::SUCCESS
}
