use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use vff_core::config::BackendKind;
use vff_core::pipeline::{Command, Pipeline};

/// Verb frame frequency pipeline.
///
/// Commands: generate, parse-llm, ingest-trees, clean, count, evaluate,
/// report, all.
#[derive(Parser, Debug)]
#[command(name = "vff", version)]
struct Cli {
    /// Pipeline step to run.
    #[arg(value_parser = parse_command)]
    command: Command,
    /// Pipeline configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides paths.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// LLM backend (overrides backend.kind).
    #[arg(long, value_parser = ["live", "transcript", "mock"])]
    backend: Option<String>,
    /// Seed for the mock backend (overrides backend.seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    let mut pipeline = match Pipeline::from_file(&cli.config) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let cfg = pipeline.config_mut();
    if let Some(out) = cli.out {
        cfg.paths.out = out;
    }
    if let Some(b) = cli.backend {
        cfg.backend.kind = b.parse::<BackendKind>().expect("clap restricts the values");
    }
    if let Some(seed) = cli.seed {
        cfg.backend.seed = seed;
    }

    match pipeline.run(cli.command) {
        Ok(steps) => {
            let names: Vec<&str> = steps.iter().map(|s| s.as_str()).collect();
            println!("ok: {} -> {}", names.join(", "), pipeline.out_dir().display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &vff_core::pipeline::PipelineError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.class());
    ExitCode::from(e.exit_code() as u8)
}
