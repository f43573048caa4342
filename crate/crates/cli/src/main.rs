use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasecool_cli::presets::{run_preset, PRESETS};
use phasecool_cli::runner::{run_ensemble, run_multimode, run_quantum, run_simulate};
use phasecool_cli::{load_config, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "phasecool", version, about = "Phase-adaptive parametric cooling simulations")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Output directory; overrides the config. Defaults to `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for ensembles.
    #[arg(long, global = true, env = "PHASECOOL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory.
    Simulate,
    /// Seeded ensemble statistics.
    Ensemble,
    /// Several modes under one shared modulation.
    Multimode,
    /// Closed-form vs quadrature position variance.
    Quantum,
    /// A named experiment.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
}

fn config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Command::Preset { name } = &cli.command {
        return run_preset(name, cli.seed.unwrap_or(0), &out_dir(cli, None));
    }
    let cfg = config(cli)?;
    let dir = out_dir(cli, Some(&cfg));
    let out = match cli.command {
        Command::Simulate => run_simulate(&cfg, &dir)?,
        Command::Ensemble => run_ensemble(&cfg, &dir)?,
        Command::Multimode => run_multimode(&cfg, &dir)?,
        Command::Quantum => run_quantum(&cfg, &dir)?,
        Command::Preset { .. } => unreachable!(),
    };
    Ok(out.files)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(files) => {
            for f in files {
                println!("{}", display(&f));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
