use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prkhs_cli::commands::{self, Approach};
use prkhs_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "prkhs", version, about = "Learn nonlinear system operators with product kernels")]
struct Cli {
    /// Worker threads for Gram assembly and batch simulation/prediction.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    Product,
    Standard,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config JSON; omitted fields take the desk defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults used when no config file is given (ignored with --config).
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    /// Reseed every random quantity from this base seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => match self.profile {
                Profile::Desk => ExperimentConfig::desk(),
                Profile::Full => ExperimentConfig::full_scale(),
            },
        };
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate training signals, states and trajectories.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on a data directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Data directory written by gen-data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "product")]
        approach: ApproachArg,
    },
    /// Predict one output trajectory.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        state: Vec<f64>,
        /// Input sequence u(0..=N), comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        input: Vec<f64>,
        /// Write the trajectory JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step RMS of a saved model on validation rollouts.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Validate on training pairs (interpolation check).
        #[arg(long)]
        from_training: bool,
    },
    /// Product learner vs single-kernel baseline on matched budgets.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time data generation, fitting and prediction.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
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
        Command::GenData { cfg, out } => {
            let m = commands::gen_data(&cfg.resolve()?, &out)?;
            eprintln!("wrote {} trajectories to {}", m.trajectories, out.display());
        }
        Command::Train { cfg, data, out, approach } => {
            let config = match cfg.config {
                Some(_) => cfg.resolve()?,
                None => commands::read_manifest(&data)?.config,
            };
            let approach = match approach {
                ApproachArg::Product => Approach::Product,
                ApproachArg::Standard => Approach::Standard,
            };
            print_json(&commands::train(&config, &data, &out, approach)?)?;
        }
        Command::Predict { model, state, input, out } => {
            let y = commands::predict(&model, &input, &state)?;
            let doc = serde_json::json!({ "trajectory": y });
            match out {
                Some(path) => write_text(&path, &serde_json::to_string_pretty(&doc)?)?,
                None => print_json(&doc)?,
            }
        }
        Command::Validate { cfg, model, out, from_training } => {
            let mut config = cfg.resolve()?;
            config.validation.from_training |= from_training;
            print_json(&commands::validate(&model, &config, &out)?)?;
        }
        Command::Compare { cfg, out } => {
            print_json(&commands::compare(&cfg.resolve()?, &out)?)?;
        }
        Command::Bench { cfg, out } => {
            print_json(&commands::bench(&cfg.resolve()?, out.as_deref())?)?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
