use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use popaudit::pipeline::{self, AuditConfig};

/// User-centered popularity-bias audit of recommender systems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit and write all reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of algorithms, in audit order.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
    },
    /// Print dataset and split statistics.
    Stats {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-emit the CSV tables from an existing audit.json.
    FiguresData {
        /// Directory to write the tables into.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>/audit.json`.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), popaudit::Error> {
    let Ok(raw) = std::env::var("POPAUDIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| popaudit::Error::Config(format!("POPAUDIT_THREADS={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| popaudit::Error::Config(e.to_string()))
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<AuditConfig> {
    let mut cfg = AuditConfig::from_file(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            algorithms,
        } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(names) = algorithms {
                cfg.select_algorithms(&names)?;
            }
            let report = pipeline::run_audit(&cfg)?;
            let files = pipeline::emit_reports(&report, &cfg.out_dir)?;
            info!("wrote {} files to {}", files.len(), cfg.out_dir.display());
            let failed: Vec<&str> = report
                .algorithms
                .iter()
                .filter(|o| o.audit().is_none())
                .map(|o| o.algorithm.as_str())
                .collect();
            if !failed.is_empty() {
                anyhow::bail!("algorithms failed: {}", failed.join(", "));
            }
        }
        Command::Stats { config, seed } => {
            let cfg = load_config(&config, seed)?;
            let (data, dropped) = pipeline::load_dataset(&cfg.dataset)?;
            let split = data.split(cfg.split_ratio, popaudit::seed::sub_seed(cfg.seed, "split"))?;
            println!("dataset: {}", data.stats());
            println!("genres:  {}", data.catalog().n_genres());
            println!("train:   {}", split.train.stats());
            println!("test:    {}", split.test.stats());
            println!("dropped: {dropped} items without genres, {} users", split.dropped_users.len());
        }
        Command::FiguresData { out, audit } => {
            let path = audit.unwrap_or_else(|| out.join("audit.json"));
            let report = pipeline::read_audit_json(&path)?;
            let files = pipeline::emit_plot_data(&report, &out)?;
            info!("wrote {} tables to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .chain()
                .any(|c| c.downcast_ref::<popaudit::Error>().is_some_and(|p| p.is_config()));
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
