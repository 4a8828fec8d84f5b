//! `ivpanel` batch front-end.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_OK};
use crate::output::sha256_hex;

#[derive(Debug, Parser)]
#[command(name = "ivpanel", version, about = "IV and panel-matching DiD estimators with a synthetic data generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `[output] dir`, else `out` next to the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for bootstrap replicates (hint only).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic census or panel with its hidden truths.
    Simulate(Common),
    /// OLS, 2SLS and Wald estimates with instrument diagnostics.
    Iv(Common),
    /// Panel-matching difference-in-differences.
    Did(Common),
    /// Markdown summary of the tables in the output directory.
    Report(Common),
}

/// Everything a subcommand needs.
pub struct Context {
    pub config: RunConfig,
    pub config_dir: PathBuf,
    pub config_sha256: String,
    pub seed_override: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn load(common: &Common) -> Result<Self, CliError> {
        let bytes = std::fs::read(&common.config).map_err(|source| CliError::Config(format!("{}: {source}", common.config.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
        let config = RunConfig::parse(text)?;
        let config_dir = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = match (&common.out, &config.output.dir) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => config_dir.join(d),
            (None, None) => config_dir.join("out"),
        };
        Ok(Self { config, config_dir, config_sha256: sha256_hex(&bytes), seed_override: common.seed, out })
    }

    /// The effective seed: the `--seed` flag, else the config value.
    pub fn seed(&self, configured: Option<u64>) -> Option<u64> {
        self.seed_override.or(configured)
    }

    pub fn require_seed(&self, configured: Option<u64>, what: &str) -> Result<u64, CliError> {
        self.seed(configured).ok_or_else(|| CliError::Config(format!("{what} is stochastic and needs a seed")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Iv(c) => ("iv", c),
        Command::Did(c) => ("did", c),
        Command::Report(c) => ("report", c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("ignoring --threads: {e}");
        }
    }
    let ctx = Context::load(common)?;
    log::info!("{name}: config {} (sha256 {})", common.config.display(), &ctx.config_sha256[..12]);
    match cli.command {
        Command::Simulate(_) => commands::simulate::run(&ctx),
        Command::Iv(_) => commands::iv::run(&ctx),
        Command::Did(_) => commands::did::run(&ctx),
        Command::Report(_) => commands::report::run(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
