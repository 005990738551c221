//! `eigen`: leading eigenpair of the finite-memory transfer matrix.  Prints
//! one JSON record `{m, lambda, residual, iters, var_profile[]}` to stdout,
//! writes the same record next to the manifest, and optionally exports the
//! full eigenfunction table as CSV.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dysonfk::transfer::TransferMatrix;
use serde::Serialize;

use crate::config::{resolve_family, Resolver};
use crate::manifest::{prepare_run_dir, RunManifest};
use crate::{flag, Ctx};

#[derive(Args)]
pub struct EigenArgs {
    /// Coupling kind: `dyson` or `finite`.
    #[arg(long)]
    pub coupling: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "J", value_name = "J0,J1,...")]
    pub j_values: Option<String>,

    /// Memory (word length) of the truncated operator.
    #[arg(long)]
    pub m: Option<u32>,
    /// Certified bracket half-width for the eigenvalue (default 1e-10).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Power-iteration cap (default 100000).
    #[arg(long)]
    pub max_iters: Option<u64>,

    /// Also write the eigenfunction table `state_index,h_value` here
    /// (relative paths land in the run directory).
    #[arg(long, value_name = "CSV")]
    pub h_csv: Option<PathBuf>,

    /// Run directory (default `<out-dir>/eigen-<manifest-id>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl EigenArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        flag(&mut map, "coupling", &self.coupling);
        flag(&mut map, "alpha", &self.alpha);
        flag(&mut map, "beta", &self.beta);
        flag(&mut map, "J", &self.j_values);
        flag(&mut map, "m", &self.m);
        flag(&mut map, "tol", &self.tol);
        flag(&mut map, "max-iters", &self.max_iters);
        map
    }
}

#[derive(Serialize)]
struct EigenRecord {
    m: u32,
    lambda: f64,
    residual: f64,
    iters: u64,
    var_profile: Vec<f64>,
}

pub fn run(ctx: &Ctx, args: EigenArgs) -> Result<()> {
    let mut resolver = Resolver::new("eigen", &ctx.file_sections, args.flag_map());
    let fam = resolve_family(&mut resolver)?;
    let m: u32 = resolver.require("m")?;
    let tol: f64 = resolver.optional("tol", 1e-10)?;
    let max_iters: u64 = resolver.optional("max-iters", 100_000)?;
    let resolved = resolver.finish()?;

    let matrix = TransferMatrix::new(&fam, m).context("building the transfer matrix")?;
    // The bracket tightens relative to the eigenvalue; `--tol` promises an
    // absolute half-width, so rescale by the first bracket when needed.
    let mut pair = matrix
        .leading_eigenpair(tol.min(1e-6), max_iters)
        .context("power iteration")?;
    if pair.converged && pair.residual > tol {
        pair = matrix
            .leading_eigenpair(tol / pair.lambda_upper, max_iters)
            .context("power iteration")?;
    }
    if !pair.converged || pair.residual > tol {
        bail!(
            "power iteration did not certify the eigenvalue to {tol:e} within {max_iters} iterations (residual {:e})",
            pair.residual
        );
    }
    let var_profile = matrix.variation_profile(&pair.h)?;
    let record = EigenRecord {
        m,
        lambda: pair.lambda,
        residual: pair.residual,
        iters: pair.iterations,
        var_profile,
    };

    let file_values = ctx.file_sections.get("eigen").cloned().unwrap_or_default();
    let mut manifest = RunManifest::new("eigen", resolved, file_values, args.flag_map());
    let run_dir = ctx.run_dir(args.out.as_deref(), "eigen", &manifest.manifest_id);
    prepare_run_dir(&run_dir)?;

    println!(
        "{}",
        serde_json::to_string(&record).expect("record serialises")
    );
    crate::write_json(&run_dir.join("eigen.json"), &record)?;
    manifest.outputs.push("eigen.json".to_string());

    if let Some(h_csv) = &args.h_csv {
        let path = if h_csv.is_absolute() {
            h_csv.clone()
        } else {
            run_dir.join(h_csv)
        };
        let rows: Vec<String> = pair
            .h
            .iter()
            .enumerate()
            .map(|(state, h)| format!("{state},{h}"))
            .collect();
        crate::write_csv(&path, &manifest.manifest_id, "state_index,h_value", &rows)?;
        manifest.outputs.push(path.display().to_string());
    }

    manifest.write(&run_dir, ctx.started)?;
    Ok(())
}
