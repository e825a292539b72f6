use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uwrap_cli::commands;
use uwrap_cli::config::RunConfig;
use uwrap_cli::{default_base, Ctx};
use uwrap_core::{Result, UwError};

#[derive(Parser)]
#[command(
    name = "uwrap",
    version,
    about = "Calibrated uncertainty wrappers for cytometry cell classifiers",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Base directory for all outputs (default: the config file's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the synthetic dataset and write one CSV per split.
    Generate(Common),
    /// Train one classifier per cell type.
    Train(Common),
    /// Build the configured wrapper variants.
    Build(Common),
    /// Score built variants on the test split.
    Evaluate(Common),
    /// Population-ratio bounds per test sample, with charts.
    Aggregate(Common),
    /// Gating scatter of one sample, shaded by uncertainty.
    PlotGating {
        #[command(flatten)]
        common: Common,
        /// Sample to plot.
        #[arg(long)]
        sample: String,
        /// Cell type whose wrapper and hues are used.
        #[arg(long)]
        cell_type: String,
        /// Marker pair "i,j" (default: the cell type's first gating pair).
        #[arg(long)]
        pair: Option<String>,
    },
    /// Per-event factor values of one sample, as CSV and scatters.
    DumpFactors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sample: String,
        #[arg(long)]
        cell_type: String,
    },
}

fn make_ctx(common: &Common) -> Result<Ctx> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let base = common.out.clone().unwrap_or_else(|| default_base(&common.config));
    Ok(Ctx::new(config, base))
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    let err = || UwError::Config(format!("--pair wants \"i,j\", got '{s}'"));
    if parts.len() != 2 {
        return Err(err());
    }
    let i = parts[0].trim().parse().map_err(|_| err())?;
    let j = parts[1].trim().parse().map_err(|_| err())?;
    Ok((i, j))
}

fn run() -> Result<()> {
    let cli = Cli::try_parse().map_err(|e| {
        // Keep stderr to one line; the full usage text stays under --help.
        if e.use_stderr() {
            let first = e.to_string().lines().next().unwrap_or("bad arguments").to_string();
            UwError::Config(first)
        } else {
            // --help/--version output is not an error.
            e.print().ok();
            std::process::exit(0);
        }
    })?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    match &cli.command {
        Command::Generate(c) => commands::cmd_generate(&make_ctx(c)?),
        Command::Train(c) => commands::cmd_train(&make_ctx(c)?),
        Command::Build(c) => commands::cmd_build(&make_ctx(c)?),
        Command::Evaluate(c) => commands::cmd_evaluate(&make_ctx(c)?),
        Command::Aggregate(c) => commands::cmd_aggregate(&make_ctx(c)?),
        Command::PlotGating { common, sample, cell_type, pair } => {
            let pair = pair.as_deref().map(parse_pair).transpose()?;
            commands::cmd_plot_gating(&make_ctx(common)?, sample, cell_type, pair)
        }
        Command::DumpFactors { common, sample, cell_type } => {
            commands::cmd_dump_factors(&make_ctx(common)?, sample, cell_type)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
