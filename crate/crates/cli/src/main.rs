use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::json;

mod commands;
mod config;

use commands::{execute, scalar_table, Table};
use config::{ConfigError, Format};

/// Variational solver for spherical mixed p-spin vector glasses.
#[derive(Debug, Parser)]
#[command(name = "parisi", version)]
struct Args {
    /// JSON run configuration; its "command" field selects the workflow
    #[arg(long)]
    config: PathBuf,
    /// Report destination (stdout if absent)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Only log errors
    #[arg(long)]
    quiet: bool,
}

fn write_csv(out: &mut dyn Write, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run(args: &Args) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| ConfigError { pointer: String::new(), message: format!("{}: {e}", args.config.display()) })?;
    let cfg = config::load(&text)?;
    let seed = args.seed.or(cfg.seed);
    let start = Instant::now();
    log::info!("running {}", cfg.name);
    let outcome = execute(&cfg.command, seed)?;
    let elapsed = start.elapsed().as_secs_f64();

    let format = args.format.or(cfg.output.format).unwrap_or(Format::Json);
    let path = args.output.clone().or(cfg.output.path.clone());
    let mut sink: Box<dyn Write> = match &path {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Json => {
            let report = json!({
                "command": cfg.name,
                "version": env!("CARGO_PKG_VERSION"),
                "seed": seed,
                "input": cfg.input,
                "result": outcome.result,
                "elapsed_seconds": elapsed,
            });
            serde_json::to_writer_pretty(&mut sink, &report)?;
            writeln!(sink)?;
        }
        Format::Csv => {
            let table = outcome.table.unwrap_or_else(|| scalar_table(&outcome.result));
            write_csv(&mut sink, &table)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<parisi_core::Error>() {
            return if err.is_numerical() { 3 } else { 2 };
        }
    }
    1
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
