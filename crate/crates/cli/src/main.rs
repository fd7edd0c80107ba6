//! `dpsda`: partition data, generate and pool synthetic data, train, evaluate
//! and report federated experiments. Every verb reads and writes files so the
//! stages compose; `reproduce` runs them all in one process.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpsda_core::fl::ExperimentConfig;
use dpsda_core::Result;

#[derive(Parser)]
#[command(
    name = "dpsda",
    version,
    about = "Federated learning with DP synthetic-data augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// CIFAR-10 with the reference CNN.
    Reference,
    /// Gaussian-cluster toy dataset with a small MLP.
    Toy,
}

/// Where the experiment configuration comes from.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; keys it omits keep their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Starting point when no config file is given.
    #[arg(
        long,
        value_enum,
        default_value = "reference",
        conflicts_with = "config"
    )]
    preset: Preset,
    /// Directory holding the CIFAR-10 binary batches, used when the config
    /// leaves `dataset.path` unset.
    #[arg(long, env = "DPSDA_DATA_ROOT")]
    data_root: Option<PathBuf>,
    /// `key=value` overrides applied after the config file; keys may be dotted.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => {
                std::fs::read_to_string(path).map_err(|e| dpsda_core::Error::io(path, e))?
            }
            None => match self.preset {
                Preset::Reference => ExperimentConfig::default().to_toml(),
                Preset::Toy => ExperimentConfig::toy().to_toml(),
            },
        };
        let mut config = ExperimentConfig::with_overrides(&base, &self.overrides)?;
        if config.dataset.path.is_none() {
            config.dataset.path = self.data_root.clone();
        }
        Ok(config)
    }
}

/// A working directory created by `partition`, plus overrides on its config.
#[derive(Args)]
struct WorkArgs {
    /// Directory written by `dpsda partition`.
    #[arg(long, short)]
    work: PathBuf,
    /// `key=value` overrides applied to the working directory's config.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved configuration as TOML.
    Config(ConfigArgs),
    /// Load the dataset and write client partitions, test and held-out sets.
    Partition {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output working directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Run seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate each client's synthetic contribution into `pool.dppl`.
    Generate(WorkArgs),
    /// Pool contributions, plan the distribution and write augmented clients.
    Pool(WorkArgs),
    /// Run the federated rounds and write a run directory under `runs/`.
    Train(WorkArgs),
    /// Re-evaluate a run's final model on a test set.
    Evaluate {
        /// Run directory written by `train` or `reproduce`.
        #[arg(long)]
        run: PathBuf,
        /// Test set (`test.dpds` from a working directory).
        #[arg(long)]
        data: PathBuf,
    },
    /// Summarise run directories into `summary.tsv` and confusion grids.
    Report {
        /// Directory whose subdirectories are runs.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Every algorithm over every seed, then the report.
    Reproduce {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
}

impl Command {
    fn verb(&self) -> &'static str {
        match self {
            Command::Config(_) => "config",
            Command::Partition { .. } => "partition",
            Command::Generate(_) => "generate",
            Command::Pool(_) => "pool",
            Command::Train(_) => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
            Command::Reproduce { .. } => "reproduce",
        }
    }

    fn run(self) -> Result<()> {
        match self {
            Command::Config(args) => {
                print!("{}", args.resolve()?.to_toml());
                Ok(())
            }
            Command::Partition { config, out, seed } => {
                commands::partition(&config.resolve()?, &out, seed)
            }
            Command::Generate(w) => commands::generate(&w.work, &w.overrides),
            Command::Pool(w) => commands::pool(&w.work, &w.overrides),
            Command::Train(w) => commands::train(&w.work, &w.overrides).map(|dir| {
                println!("{}", dir.display());
            }),
            Command::Evaluate { run, data } => commands::evaluate(&run, &data),
            Command::Report { runs, out } => report::write_report(&runs, &out),
            Command::Reproduce { config, out } => commands::reproduce(&config.resolve()?, &out),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    let verb = cli.command.verb();
    match cli.command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpsda {verb}: {e}");
            ExitCode::from(e.family().exit_code() as u8)
        }
    }
}
