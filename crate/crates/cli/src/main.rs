//! `pisa`: generate data, train the embedding component and predictors,
//! evaluate model files and run the removal experiments.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numeric error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use pisa_core::error::ErrorClass;
use pisa_core::experiments::Protocol;
use pisa_core::models::ModelKind;

use config::RunConfig;
use output::OutDir;

/// Invalid invocation or configuration (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "pisa", version, about = "Session purchase-intent prediction from item content")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; `PISA_<SECTION>_<KEY>` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Content,
    Integrated,
    Baseline,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Content => ModelKind::Content,
            KindArg::Integrated => ModelKind::Integrated,
            KindArg::Baseline => ModelKind::Baseline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    AllData,
    ColdStart,
    RandomRemoval,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic catalog and event log.
    GenData,
    /// Train the text embedding component on the catalog.
    TrainEmbed,
    /// Train one predictor on the training days.
    Train {
        #[arg(long, value_enum)]
        model_kind: KindArg,
    },
    /// Score model files on the test day.
    Evaluate {
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Run a removal protocol end to end.
    Experiment {
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        /// Comma-separated removal fractions.
        #[arg(long, value_delimiter = ',')]
        x_list: Option<Vec<f64>>,
    },
}

fn set_workers(n: Option<usize>) -> Result<()> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(Usage("--workers must be positive".into()).into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow::anyhow!(e))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; --workers {n} ignored");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    set_workers(cli.workers)?;
    let mut cfg = RunConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = cli.out {
        cfg.paths.out = out;
    }
    let out = OutDir::create(&cfg.paths.out, cli.force)?;
    let name = match &cli.command {
        Command::GenData => {
            commands::gen_data(&cfg, &out)?;
            "gen-data"
        }
        Command::TrainEmbed => {
            commands::train_embed(&cfg, &out)?;
            "train-embed"
        }
        Command::Train { model_kind } => {
            commands::train(&cfg, &out, (*model_kind).into())?;
            "train"
        }
        Command::Evaluate { models } => {
            commands::evaluate(&cfg, &out, models)?;
            "evaluate"
        }
        Command::Experiment { protocol, x_list } => {
            if let Some(p) = protocol {
                cfg.experiment.protocol = p.to_possible_value().expect("no skipped variants").get_name().to_string();
            }
            if let Some(xs) = x_list {
                cfg.experiment.x_list = xs.clone();
            }
            let protocol: Protocol = cfg.protocol()?;
            commands::experiment(&cfg, &out, &protocol)?;
            "experiment"
        }
    };
    out.write_manifest(name, cfg.seed)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<pisa_core::Error>() {
            return match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            };
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
