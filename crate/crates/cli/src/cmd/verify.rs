//! `verify`: exact identity checks over full enumerations at small volume.
//! Prints the per-identity discrepancy table and exits nonzero on any
//! failure.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use dysonfk::oracle::verify_identities;
use serde::Serialize;

use crate::config::{resolve_family, Resolver};
use crate::manifest::{prepare_run_dir, RunManifest};
use crate::{flag, Ctx};

#[derive(Args)]
pub struct VerifyArgs {
    /// Coupling kind: `dyson` or `finite`.
    #[arg(long)]
    pub coupling: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "J", value_name = "J0,J1,...")]
    pub j_values: Option<String>,

    /// Two-sided half-volume: identities run on [-L, L).
    #[arg(long = "L")]
    pub l: Option<i64>,
    /// Couplings beyond this range are dropped from the enumerated model
    /// (default 3); the cutoff model is used on both sides of each identity.
    #[arg(long)]
    pub range_cutoff: Option<u64>,

    /// Run directory (default `<out-dir>/verify-<manifest-id>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl VerifyArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        flag(&mut map, "coupling", &self.coupling);
        flag(&mut map, "alpha", &self.alpha);
        flag(&mut map, "beta", &self.beta);
        flag(&mut map, "J", &self.j_values);
        flag(&mut map, "L", &self.l);
        flag(&mut map, "range-cutoff", &self.range_cutoff);
        map
    }
}

#[derive(Serialize)]
struct CheckRow {
    name: String,
    cases: u64,
    max_discrepancy: f64,
    tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    manifest: String,
    l: i64,
    range_cutoff: u64,
    num_slots: usize,
    k0: f64,
    checks: Vec<CheckRow>,
    all_pass: bool,
}

pub fn run(ctx: &Ctx, args: VerifyArgs) -> Result<()> {
    let mut resolver = Resolver::new("verify", &ctx.file_sections, args.flag_map());
    let fam = resolve_family(&mut resolver)?;
    let l: i64 = resolver.require("L")?;
    let range_cutoff: u64 = resolver.optional("range-cutoff", 3)?;
    let resolved = resolver.finish()?;

    let report = verify_identities(&fam, l, range_cutoff)?;
    print!("{report}");

    let file_values = ctx.file_sections.get("verify").cloned().unwrap_or_default();
    let mut manifest = RunManifest::new("verify", resolved, file_values, args.flag_map());
    let run_dir = ctx.run_dir(args.out.as_deref(), "verify", &manifest.manifest_id);
    prepare_run_dir(&run_dir)?;
    let doc = VerifyReport {
        schema: "verify-report-v1",
        manifest: manifest.manifest_id.clone(),
        l: report.l,
        range_cutoff: report.range_cutoff,
        num_slots: report.num_slots,
        k0: report.k0,
        checks: report
            .checks
            .iter()
            .map(|c| CheckRow {
                name: c.name.to_string(),
                cases: c.cases,
                max_discrepancy: c.max_discrepancy,
                tol: c.tol,
                pass: c.pass(),
            })
            .collect(),
        all_pass: report.all_pass(),
    };
    crate::write_json(&run_dir.join("verify.json"), &doc)?;
    manifest.outputs.push("verify.json".to_string());
    manifest.write(&run_dir, ctx.started)?;

    if !report.all_pass() {
        bail!(
            "identity checks failed (max discrepancy {:.3e})",
            report.max_discrepancy()
        );
    }
    Ok(())
}
