use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::Parser;
use league_core::harvest::SourceKind;
use league_core::workspace::{emit_report, load_profile, run_pipeline, ConfigError, Overrides, RunConfig, Runtime};

/// Builds per-dataset leaderboards for a research topic from paper sources.
///
/// Exit codes: 0 success, 2 configuration error, 3 provider or source
/// error, 4 nothing survived filtering. Live providers read their key from
/// LEAGUE_API_KEY.
#[derive(Debug, Parser)]
#[command(name = "league", version)]
struct Cli {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    topic: Option<String>,
    /// Oldest publication date to keep, YYYY-MM-DD.
    #[arg(long)]
    cutoff: Option<NaiveDate>,
    /// Number of datasets to build boards for.
    #[arg(long)]
    k: Option<usize>,
    /// Maximum rows per board.
    #[arg(long)]
    items: Option<usize>,
    /// Candidate boards per dataset.
    #[arg(long)]
    iters: Option<usize>,
    /// Extraction provider profile (TOML).
    #[arg(long)]
    provider: Option<PathBuf>,
    /// Judge provider profile (TOML); defaults to the extraction provider.
    #[arg(long)]
    judge: Option<PathBuf>,
    /// `arxiv`, or a directory of fixture papers.
    #[arg(long)]
    source: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Refuse every network call.
    #[arg(long)]
    offline: bool,
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn build_config(cli: Cli) -> Result<RunConfig, ConfigError> {
    let overrides = Overrides {
        topic: cli.topic,
        cutoff: cli.cutoff,
        k: cli.k,
        items: cli.items,
        iters: cli.iters,
        provider: cli.provider,
        judge: cli.judge,
        source: cli.source,
        out: cli.out,
        cache: cli.cache,
        offline: cli.offline,
    };
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let missing = |flag: &str| ConfigError::Invalid(format!("{flag} is required without --config"));
            let topic = overrides.topic.clone().ok_or_else(|| missing("--topic"))?;
            let cutoff = overrides.cutoff.ok_or_else(|| missing("--cutoff"))?;
            let profile = load_profile(overrides.provider.as_deref().ok_or_else(|| missing("--provider"))?)?;
            overrides.source.as_ref().ok_or_else(|| missing("--source"))?;
            RunConfig::new(&topic, cutoff, SourceKind::Arxiv, profile)
        }
    };
    config.apply(overrides)?;
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("league: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = Runtime::from_env(config.offline)
        .and_then(|runtime| run_pipeline(&config, &runtime))
        .and_then(|run| emit_report(&run, &config.output_dir));
    match outcome {
        Ok(summary) => {
            print!("{}", summary.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("league: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
