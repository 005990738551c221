//! `dysonfk` — command-line driver for the long-range Ising / random-cluster
//! toolkit: MCMC sampling, estimator reports, transfer-operator eigenpairs,
//! exact small-volume verification, coupling-strength scans, and report
//! merging.  Every run writes a manifest that replays it exactly.

mod cmd;
mod config;
mod jsonl;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dysonfk", version, about, disable_help_subcommand = true)]
struct Cli {
    /// Config file: `key = value` lines under one `[subcommand]` section each.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Base directory for run outputs (default: $DYSONFK_OUT_DIR, then `.`).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run random-cluster chains and write sweep-record streams.
    Sample(cmd::sample::SampleArgs),
    /// Compute estimators over recorded sweep streams.
    Estimate(cmd::estimate::EstimateArgs),
    /// Leading transfer-operator eigenpair at finite memory.
    Eigen(cmd::eigen::EigenArgs),
    /// Exact identity checks at enumerable volumes (nonzero exit on failure).
    Verify(cmd::verify::VerifyArgs),
    /// Percolation diagnostics along a grid of coupling strengths.
    Scan(cmd::scan::ScanArgs),
    /// Merge estimator reports into a plain-text summary and CSV tables.
    Report(cmd::report::ReportArgs),
}

/// Context shared by every subcommand: the validated config file and the
/// base output directory.
pub struct Ctx {
    pub file_sections: config::FileSections,
    pub out_base: PathBuf,
    pub started: std::time::Instant,
}

impl Ctx {
    /// Resolves the run directory: explicit `--out`, else a deterministic
    /// directory named after the subcommand and manifest id.
    pub fn run_dir(&self, out: Option<&Path>, subcommand: &str, id: &str) -> PathBuf {
        match out {
            Some(dir) => dir.to_path_buf(),
            None => self.out_base.join(format!("{subcommand}-{id}")),
        }
    }
}

/// Canonical flag map entry: `Some` values only, rendered with `Display`.
pub fn flag<T: std::fmt::Display>(
    map: &mut BTreeMap<String, String>,
    key: &str,
    value: &Option<T>,
) {
    if let Some(v) = value {
        map.insert(key.to_string(), v.to_string());
    }
}

/// Boolean flags contribute only when set (they cannot unset a file value).
pub fn flag_true(map: &mut BTreeMap<String, String>, key: &str, value: bool) {
    if value {
        map.insert(key.to_string(), "true".to_string());
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_sections = match &cli.config {
        Some(path) => config::parse_config_file(path)?,
        None => config::FileSections::new(),
    };
    let out_base = cli
        .out_dir
        .or_else(|| std::env::var_os("DYSONFK_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        file_sections,
        out_base,
        started: std::time::Instant::now(),
    };
    match cli.command {
        Command::Sample(args) => cmd::sample::run(&ctx, args),
        Command::Estimate(args) => cmd::estimate::run(&ctx, args),
        Command::Eigen(args) => cmd::eigen::run(&ctx, args),
        Command::Verify(args) => cmd::verify::run(&ctx, args),
        Command::Scan(args) => cmd::scan::run(&ctx, args),
        Command::Report(args) => cmd::report::run(&ctx, args),
    }
}

/// Writes a JSON document with a trailing newline, with path context.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("report serialises");
    std::fs::write(path, body + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes a CSV file whose first line references the producing manifest.
pub fn write_csv(path: &Path, manifest_id: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut body = String::with_capacity(rows.len() * 32 + 64);
    body.push_str(&format!("# manifest {manifest_id}\n{header}\n"));
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}
