use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use newsrisk::corpus::AnalysisWindow;
use newsrisk::pipeline::{self, RunConfig};
use newsrisk::Result;

#[derive(Debug, Parser)]
#[command(
    name = "newsrisk",
    version,
    about = "News co-occurrence networks, centrality and sentiment RiskRank",
    allow_negative_numbers = true
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Analysis window, e.g. 2011Q1..2016Q2.
    #[arg(long, global = true, value_name = "FROM..TO")]
    quarters: Option<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic universe, corpus, prices and market caps.
    Fixture {
        /// Target directory; inputs are then read from here by default.
        #[arg(long, default_value = "data")]
        dir: PathBuf,
        /// Disable the planted price drift.
        #[arg(long)]
        null: bool,
    },
    /// Extract company mentions per article.
    Parse,
    /// Build positive, negative and mixed networks per quarter.
    Networks,
    /// Information centrality tables and average ranks.
    Rank,
    /// Relative sentiment and RiskRank for the selected universe.
    Risk,
    /// Decline events, rates and tables.
    Backtest,
    /// Text tables and figure exports.
    Report,
    /// Every stage from parse to report.
    RunAll,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.output {
        cfg.paths.output = v.clone();
    }
    if let Some(v) = cli.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = cli.lambda {
        cfg.calibration.lambda = v;
    }
    if let Some(v) = cli.mu {
        cfg.calibration.mu = v;
    }
    if let Some(v) = cli.theta {
        cfg.calibration.theta = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(q) = &cli.quarters {
        cfg.window = q.parse::<AnalysisWindow>()?;
    }
    if let Command::Fixture { dir, null } = &cli.command {
        if *null {
            cfg.fixture.drift_per_day = 0.0;
        }
        cfg.paths = pipeline::Paths::from_data_dir(dir, &cfg.paths.output);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already configured: {e}");
        }
    }
    log::info!("config hash {}", cfg.hash());
    match &cli.command {
        Command::Fixture { dir, .. } => pipeline::cmd_fixture(&cfg, dir).map(|_| ()),
        Command::Parse => pipeline::cmd_parse(&cfg),
        Command::Networks => pipeline::cmd_networks(&cfg),
        Command::Rank => pipeline::cmd_rank(&cfg),
        Command::Risk => pipeline::cmd_risk(&cfg),
        Command::Backtest => pipeline::cmd_backtest(&cfg),
        Command::Report => pipeline::cmd_report(&cfg),
        Command::RunAll => pipeline::cmd_run_all(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} msg={:?}",
                record.level(),
                record.target(),
                record.args().to_string()
            )
        })
        .init();
    // usage errors are validation failures; exit 2 is reserved for a
    // missing upstream stage
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
