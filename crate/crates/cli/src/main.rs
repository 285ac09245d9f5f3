use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peakshare_cli::config::PipelineConfig;
use peakshare_cli::pipeline::{self, Ctx};
use peakshare_cli::CliError;

/// Peak-contribution analytics pipeline on smart-meter data.
#[derive(Parser)]
#[command(name = "peakshare", version, about)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Verify input artifacts against the run manifest before running.
    #[arg(long, global = true)]
    strict: bool,

    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic population (meter, SCADA, survey CSVs).
    Synth,
    /// Parse, validate and clean the raw CSVs; emit the cleaning report.
    Ingest,
    /// Compute per-customer monthly peak contributions.
    Cmpc,
    /// Discover seasonal typical load patterns by spectral clustering.
    Cluster,
    /// Train the pattern classifier and the clusterwise regressions.
    Train,
    /// Estimate contributions for unobservable customers.
    Estimate,
    /// Compare the estimator against peak-, entropy- and baseline strategies.
    Bench,
    /// Simulate direct-load-control peak shaving under each strategy.
    Dr,
    /// Merge accuracy metrics into the final report and plot-ready CSVs.
    Report,
    /// Run every stage in order.
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&config.out_dir));
    let ctx = Ctx::new(config, out_dir, cli.strict)?;
    match cli.command {
        Command::Synth => pipeline::cmd_synth(&ctx),
        Command::Ingest => pipeline::cmd_ingest(&ctx),
        Command::Cmpc => pipeline::cmd_cmpc(&ctx),
        Command::Cluster => pipeline::cmd_cluster(&ctx),
        Command::Train => pipeline::cmd_train(&ctx),
        Command::Estimate => pipeline::cmd_estimate(&ctx),
        Command::Bench => pipeline::cmd_bench(&ctx),
        Command::Dr => pipeline::cmd_dr(&ctx),
        Command::Report => pipeline::cmd_report(&ctx),
        Command::All => pipeline::run_all(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
