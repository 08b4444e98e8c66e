use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikeq_cli::commands::{self, HistogramSource};
use spikeq_cli::config::parse_overrides;
use spikeq_cli::error::{CliError, Result};

/// Spiking-neural-network equalizer for a PAM-4 IM/DD link.
///
/// Any config field can be overridden with a dotted flag after the named
/// options, e.g. `--train.alpha 1e-2` or `--link.fiber_length_km=2`.
#[derive(Parser)]
#[command(name = "spikeq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Dotted config overrides, `--section.field value`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    rest: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train encoder and network; writes per-epoch checkpoints and history.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// BER curves of one or more checkpoints, or a spike-rate table.
    Eval {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        /// Evaluate at this single noise level (dB).
        #[arg(long, allow_negative_numbers = true)]
        sigma2: Option<f64>,
        /// Write the spike-rate table instead of BER curves.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train one model per sweep.alpha_list entry plus the benchmark encoders.
    SweepAlpha {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-evaluate a checkpoint at each sweep.graded_bits_list width.
    SweepQuant {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Threshold slicer BER curve.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Histogram of learned encoder weights.
    Histogram {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        checkpoint: Option<PathBuf>,
        /// Histogram of a fresh initialization instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Dump symbols and received samples of one link realization.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        symbols: usize,
        /// Noise level in dB; defaults to train.train_sigma2_db.
        #[arg(long, allow_negative_numbers = true, conflicts_with = "noiseless")]
        sigma2: Option<f64>,
        #[arg(long)]
        noiseless: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, overrides } => {
            let run = commands::cmd_train(&config, &parse_overrides(&overrides.rest)?)?;
            println!("{} {}", run.checkpoint.display(), run.hash);
        }
        Command::Eval {
            checkpoints,
            sigma2,
            table,
            overrides,
        } => {
            commands::cmd_eval(
                &checkpoints,
                &parse_overrides(&overrides.rest)?,
                sigma2,
                table,
            )?;
        }
        Command::SweepAlpha { config, overrides } => {
            commands::cmd_sweep_alpha(&config, &parse_overrides(&overrides.rest)?)?;
        }
        Command::SweepQuant {
            checkpoint,
            overrides,
        } => {
            commands::cmd_sweep_quant(&checkpoint, &parse_overrides(&overrides.rest)?)?;
        }
        Command::Baseline { config, overrides } => {
            commands::cmd_baseline(&config, &parse_overrides(&overrides.rest)?)?;
        }
        Command::Histogram {
            checkpoint,
            config,
            bins,
            overrides,
        } => {
            let source = match (checkpoint, config) {
                (Some(p), _) => HistogramSource::Checkpoint(p),
                (None, Some(p)) => HistogramSource::Config(p),
                (None, None) => {
                    return Err(CliError::Usage("give --checkpoint or --config".to_owned()))
                }
            };
            commands::cmd_histogram(&source, &parse_overrides(&overrides.rest)?, bins)?;
        }
        Command::Simulate {
            config,
            symbols,
            sigma2,
            noiseless,
            overrides,
        } => {
            let s2 = if noiseless {
                Some(spikeq::channel::NOISELESS)
            } else {
                sigma2
            };
            commands::cmd_simulate(&config, &parse_overrides(&overrides.rest)?, symbols, s2)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::FAILURE
        }
    }
}
