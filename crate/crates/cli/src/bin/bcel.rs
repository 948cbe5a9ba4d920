use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcel_cli::{cmd_compare, cmd_replicate, cmd_run, cmd_simulate, CliError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

/// Bayesian computation with empirical likelihood.
#[derive(Parser)]
#[command(name = "bcel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `out`, else ./bcel-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior for one config.
    Run(Common),
    /// Fit two configs on the same data and tabulate them together.
    Compare {
        /// The two configs, as `--config a.toml --config b.toml`.
        #[arg(long, num_args = 1, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo study of the methods at the config's truth.
    Replicate {
        #[command(flatten)]
        common: Common,
        /// Number of replicates (default: the config's, else 100).
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Write the configured simulated dataset.
    Simulate(Common),
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c.config, c.seed)?;
            let out = cmd_run(&cfg, c.out.as_deref())?;
            let t = &out.sample.tally;
            eprintln!(
                "ESS {:.1} of {} particles; {} hull violations, {} domain errors, {} solver caps",
                out.summary.ess,
                out.sample.len(),
                t.hull_violations,
                t.domain_errors,
                t.max_iterations
            );
            report(&out.files);
        }
        Command::Compare { config, seed, out } => {
            let [a, b] = config.as_slice() else {
                return Err(CliError::Config(format!("compare needs exactly two --config files, got {}", config.len())));
            };
            let files = cmd_compare(&load(a, seed)?, &load(b, seed)?, out.as_deref())?;
            report(&files);
        }
        Command::Replicate { common: c, replicates } => {
            let cfg = load(&c.config, c.seed)?;
            let (table, files) = cmd_replicate(&cfg, replicates, c.out.as_deref())?;
            print!("{}", table.to_pretty());
            report(&files);
        }
        Command::Simulate(c) => {
            let cfg = load(&c.config, c.seed)?;
            report(&[cmd_simulate(&cfg, c.out.as_deref())?]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bcel: {e}");
            e.exit_code()
        }
    }
}
