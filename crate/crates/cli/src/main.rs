//! `screenwise`: batch interface to the screening engine.
//!
//! Exit codes: 0 success, 1 usage (bad flags, missing files), 2 validation
//! (malformed documents, out-of-range parameters, contradictory evidence),
//! 3 runtime (I/O and server failures).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use screenwise_core::par;
use screenwise_server::ServerConfig;

mod args;
mod commands;
mod config;
mod error;
mod output;

use args::{Cli, Command, ServeArgs};
use commands::Ctx;
use config::Config;
use error::CliError;

/// Reads a file named by a flag; a missing file is a usage error.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    commands::existing(path)?;
    std::fs::read_to_string(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn serve(ctx: Ctx, model: Option<String>, a: &ServeArgs) -> Result<(), CliError> {
    let section = &ctx.config.server;
    let host = a
        .host
        .clone()
        .or(section.host.clone())
        .unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(section.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .or_else(|_| format!("[{host}]:{port}").parse())
        .map_err(|_| CliError::usage(format!("`{host}` is not an IP address")))?;
    let defaults = ServerConfig::default();
    let config = ServerConfig {
        model_path: model
            .or(ctx.config.model.clone())
            .filter(|m| m != "bundled")
            .map(PathBuf::from),
        catalog_path: ctx.config.catalog.clone(),
        addr,
        work_dir: a
            .work_dir
            .clone()
            .or(section.work_dir.clone())
            .unwrap_or(defaults.work_dir),
        workers: a.workers.or(section.workers).unwrap_or(defaults.workers),
        params: ctx.params,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    rt.block_on(screenwise_server::serve(config))
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        par::init_global_threads(n);
    }
    let catalog = cli.catalog.clone();
    let mut ctx = Ctx::load(cli.model.as_deref(), catalog.as_deref(), cli.seed, config)?;
    if let Some(c) = catalog {
        ctx.config.catalog = Some(c);
    }
    let out = match &cli.command {
        Command::Infer(a) => commands::infer(&ctx, a)?,
        Command::Recommend(a) => commands::recommend(&ctx, a)?,
        Command::Elicit(a) => commands::elicit(&ctx, a)?,
        Command::Calibrate(a) => commands::calibrate(&ctx, a)?,
        Command::Allocate(a) => commands::allocate_cmd(&ctx, a)?,
        Command::Simulate(a) => commands::simulate_cmd(&ctx, a)?,
        Command::BenchmarkDevice(a) => commands::benchmark_device_cmd(&ctx, a)?,
        Command::Curves(a) => commands::curves(&ctx, a)?,
        Command::SweepPe(a) => commands::sweep_pe_cmd(&ctx, a)?,
        Command::SweepLambda(a) => commands::sweep_lambda_cmd(&ctx, a)?,
        Command::GenPopulation(a) => commands::gen_population(&ctx, a)?,
        Command::Serve(a) => return serve(ctx, cli.model.clone(), a),
    };
    out.emit(cli.out.as_deref(), cli.json)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(error::USAGE as u8),
            };
        }
    };
    let level = if matches!(cli.command, Command::Serve(_)) {
        "info"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
