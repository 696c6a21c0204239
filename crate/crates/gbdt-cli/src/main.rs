//! `gbdt`: runs constructions, direct and inverse problems and
//! verification from a JSON run configuration.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 on numerical failure,
//! 4 on failed verification.

mod commands;
mod config;
mod error;
mod output;
mod seed;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gbdt::GridSpec;

use crate::config::{check_tol, RunConfig};
use crate::error::CliError;
use crate::output::{meta_path, write_atomic};

#[derive(Parser, Debug)]
#[command(name = "gbdt", version, about = "GBDT constructions for matrix spectral problems")]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verification tolerance; overrides the config's `tolerances.verify`.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid "x0,x1,nx[,t0,t1,nt]"; overrides the config's `grid`.
    #[arg(long)]
    grid: Option<String>,
    /// Only validate the seed and report its identity residual, on stdout
    /// unless `--out` is given.
    #[arg(long)]
    seed_check_only: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GBDT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("GBDT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn prepare_parent(path: &std::path::Path) -> Result<(), CliError> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display()))),
        None => Ok(()),
    }
}

fn run(args: Args) -> Result<u8, CliError> {
    configure_threads()?;
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(g) = &args.grid {
        cfg.grid = Some(g.parse::<GridSpec>().map_err(|e| CliError::Config(format!("--grid: {e}")))?);
    }
    if let Some(t) = args.tol {
        check_tol(t)?;
        cfg.tolerances.verify = Some(t);
    }
    cfg.check()?;

    if args.seed_check_only {
        let body = commands::seed_check(&cfg)?;
        match &args.out {
            Some(out) => {
                prepare_parent(out)?;
                write_atomic(out, &body)?;
            }
            None => print!("{body}"),
        }
        return Ok(0);
    }

    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Config("no output path: set \"output\" or pass --out".into()))?;
    prepare_parent(&out)?;
    let outcome = commands::run(&cfg)?;
    write_atomic(&out, &outcome.body)?;
    let mut meta = serde_json::to_string_pretty(&outcome.meta).expect("metadata serializes");
    meta.push('\n');
    write_atomic(&meta_path(&out), &meta)?;
    if let Some(msg) = outcome.failure {
        eprintln!("gbdt: verification failed: {msg}");
        return Ok(4);
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gbdt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
