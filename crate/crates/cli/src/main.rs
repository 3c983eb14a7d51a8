use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, warn, LevelFilter};
use povm_lab_cli::config::{parse_config, Mode};
use povm_lab_cli::run::{run, RunError};

#[derive(Parser, Debug)]
#[command(name = "povm-lab", version, about = "Search and certify optimal POVMs for partial-knowledge tomography")]
struct Args {
    /// anneal, refine, verify or gridinfo; must agree with the config's `mode`
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `anneal.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for cluster sums and variant evaluation.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging() {
    let raw = std::env::var("POVM_LAB_LOG").unwrap_or_else(|_| "info".into());
    let level = match raw.as_str() {
        "quiet" => LevelFilter::Off,
        "info" => LevelFilter::Info,
        "debug" => LevelFilter::Debug,
        _ => LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if !matches!(raw.as_str(), "quiet" | "info" | "debug") {
        warn!("ignoring POVM_LAB_LOG={raw}; expected quiet, info or debug");
    }
}

fn main() -> ExitCode {
    init_logging();
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("povm-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(args: &Args) -> Result<bool, RunError> {
    if args.workers == 0 {
        return Err(RunError::Config(povm_lab_cli::config::ConfigError::Inconsistent(
            "--workers must be at least 1".into(),
        )));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build_global()
        .expect("thread pool is configured once");

    let text = std::fs::read_to_string(&args.config).map_err(|source| RunError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if cfg.mode != args.mode {
        return Err(RunError::Config(povm_lab_cli::config::ConfigError::Inconsistent(format!(
            "command line asks for `{}` but the config sets mode = {}",
            args.mode, cfg.mode
        ))));
    }
    if let Some(seed) = args.seed {
        cfg.anneal.rng_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    run(&cfg)
}
