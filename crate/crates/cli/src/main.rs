mod commands;
mod config;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use atomo_core::quantizer::QNorm;
use atomo_core::sim::Method;
use clap::{Args, Parser, Subcommand};

use commands::{Ctx, Decomposition, Variant};
use config::{Overrides, TuneSection};
use output::Format;

/// Variance-optimal gradient sparsification experiments.
#[derive(Parser)]
#[command(name = "atomo", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or directory for train and sweep.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal keep probabilities for a coefficient vector.
    Probabilities {
        /// Tensor file (ATEN or text); all entries are used as coefficients.
        #[arg(long, conflicts_with = "values")]
        input: Option<PathBuf>,
        /// Inline coefficients, e.g. "3,1,1,1".
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        /// Sparsity budget s.
        #[arg(short, long)]
        budget: f64,
        #[arg(long, value_enum, default_value_t = Variant::Sort)]
        variant: Variant,
    },
    /// Draw one sparsified gradient and encode it.
    Sparsify {
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long)]
        budget: f64,
        #[arg(long, value_enum, default_value_t = Decomposition::Entrywise)]
        decomposition: Decomposition,
    },
    /// Draw one l_q-quantized gradient (q = 2 is 1-bit QSGD, inf is TernGrad).
    Quantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long, default_value = "2")]
        q: QNorm,
    },
    /// Entry-wise against spectral sparsification at equal communication.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long)]
        budget: f64,
    },
    /// Run one simulated training experiment.
    Train(TrainArgs),
    /// Train every method listed in the config's [sweep] section.
    Sweep(TrainArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// e.g. dense, atomo_entrywise:5, spectral_atomo:3, qsgd_1bit, terngrad, lq:3
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Tune the step size over 2^MIN ..= 2^MAX.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_hyphen_values = true)]
    tune: Option<Vec<i32>>,
    #[arg(long)]
    loss_threshold: Option<f64>,
    /// Record per-round wall time (metrics are then no longer reproducible).
    #[arg(long)]
    wall_time: bool,
}

impl TrainArgs {
    fn overrides(&self, seed: Option<u64>) -> Overrides {
        Overrides {
            seed,
            method: self.method,
            rounds: self.rounds,
            step_size: self.step_size,
            workers: self.workers,
            batch_size: self.batch_size,
            tune: self.tune.as_ref().map(|t| TuneSection { min_exponent: t[0], max_exponent: t[1] }),
            loss_threshold: self.loss_threshold,
            record_wall_time: self.wall_time,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Common { seed, out, config, format } = cli.common;
    let ctx = Ctx { seed: seed.unwrap_or(0), out, format };
    let need_config = || config.clone().ok_or_else(|| anyhow::anyhow!("--config is required"));
    match cli.command {
        Command::Probabilities { input, values, budget, variant } => {
            commands::probabilities(&ctx, input.as_deref(), values.as_deref(), budget, variant)
        }
        Command::Sparsify { input, budget, decomposition } => commands::sparsify(&ctx, &input, budget, decomposition),
        Command::Quantize { input, q } => commands::quantize(&ctx, &input, q),
        Command::Compare { input, budget } => commands::compare(&ctx, &input, budget),
        Command::Train(args) => commands::train_cmd(&ctx, &need_config()?, &args.overrides(seed)),
        Command::Sweep(args) => commands::sweep(&ctx, &need_config()?, &args.overrides(seed)),
    }
}

/// 3 for numerical failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<atomo_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
