//! `report`: merge estimator reports into a plain-text summary plus a CSV
//! bundle.  Estimate reports that share both the sampling configuration key
//! and the estimator parameters are pooled (inverse-variance for scalar
//! estimates, record-weighted for curves); otherwise the tool refuses to
//! pool and emits per-file sections.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dysonfk::estimators::Estimate;
use serde::Deserialize;

use super::estimate::{EstimateReport, REPORT_SCHEMA};
use super::scan::{ScanReport, SCAN_SCHEMA};
use crate::manifest::{prepare_run_dir, RunManifest};
use crate::Ctx;

#[derive(Args)]
pub struct ReportArgs {
    /// Estimate reports (`report.json`) and/or scan reports (`scan.json`).
    #[arg(required = true, value_name = "FILE")]
    pub files: Vec<PathBuf>,

    /// Run directory (default `<out-dir>/report-<manifest-id>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum Input {
    Estimate(Box<EstimateReport>),
    Scan(Box<ScanReport>),
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema: Option<String>,
}

fn load_input(path: &PathBuf) -> Result<Input> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let probe: SchemaProbe = serde_json::from_str(&text)
        .with_context(|| format!("{}: not a JSON report", path.display()))?;
    match probe.schema.as_deref() {
        Some(REPORT_SCHEMA) => {
            let report = serde_json::from_str(&text)
                .with_context(|| format!("{}: malformed estimate report", path.display()))?;
            Ok(Input::Estimate(Box::new(report)))
        }
        Some(SCAN_SCHEMA) => {
            let report = serde_json::from_str(&text)
                .with_context(|| format!("{}: malformed scan report", path.display()))?;
            Ok(Input::Scan(Box::new(report)))
        }
        Some(other) => bail!(
            "{}: schema mismatch: expected {REPORT_SCHEMA} or {SCAN_SCHEMA}, found {other}",
            path.display()
        ),
        None => bail!(
            "{}: schema mismatch: missing `schema` field",
            path.display()
        ),
    }
}

/// Inverse-variance pooling of independent estimates of one quantity.  An
/// exact input (zero standard error) dominates; the pooled error never
/// exceeds the smallest input error.
pub fn pool(estimates: &[&Estimate]) -> Estimate {
    assert!(!estimates.is_empty());
    let log_domain = estimates[0].log_domain;
    let n_samples = estimates.iter().map(|e| e.n_samples).sum();
    let exact: Vec<&&Estimate> = estimates.iter().filter(|e| e.std_error == 0.0).collect();
    if !exact.is_empty() {
        let mean = exact.iter().map(|e| e.mean).sum::<f64>() / exact.len() as f64;
        return Estimate {
            mean,
            std_error: 0.0,
            n_samples,
            log_domain,
        };
    }
    let mut weight_sum = 0.0;
    let mut weighted_mean = 0.0;
    for e in estimates {
        let w = 1.0 / (e.std_error * e.std_error);
        weight_sum += w;
        weighted_mean += w * e.mean;
    }
    Estimate {
        mean: weighted_mean / weight_sum,
        std_error: weight_sum.sqrt().recip(),
        n_samples,
        log_domain,
    }
}

fn fmt_estimate(e: &Estimate) -> String {
    format!("{:.6} +- {:.6} (n = {})", e.mean, e.std_error, e.n_samples)
}

pub fn run(ctx: &Ctx, args: ReportArgs) -> Result<()> {
    let mut estimates: Vec<(String, EstimateReport)> = Vec::new();
    let mut scans: Vec<(String, ScanReport)> = Vec::new();
    for path in &args.files {
        match load_input(path)? {
            Input::Estimate(r) => estimates.push((path.display().to_string(), *r)),
            Input::Scan(r) => scans.push((path.display().to_string(), *r)),
        }
    }

    let resolved: BTreeMap<String, String> = BTreeMap::new();
    let mut manifest = RunManifest::new("report", resolved, BTreeMap::new(), BTreeMap::new());
    manifest.inputs = args.files.iter().map(|p| p.display().to_string()).collect();
    let run_dir = ctx.run_dir(args.out.as_deref(), "report", &manifest.manifest_id);
    prepare_run_dir(&run_dir)?;

    let poolable = estimates.len() > 1
        && estimates.iter().all(|(_, r)| {
            r.config_key != "mixed"
                && r.config_key == estimates[0].1.config_key
                && r.estimator_key == estimates[0].1.estimator_key
        });

    let mut summary = String::new();
    let mut tail_rows: Vec<String> = Vec::new();
    let mut xi_rows: Vec<String> = Vec::new();
    let mut hn_rows: Vec<String> = Vec::new();
    let mut scan_rows: Vec<String> = Vec::new();

    writeln!(summary, "inputs: {}", estimates.len() + scans.len()).unwrap();
    if !estimates.is_empty() {
        if poolable {
            writeln!(
                summary,
                "estimate reports share config key {} and estimator parameters: pooling {} report(s)",
                estimates[0].1.config_key,
                estimates.len()
            )
            .unwrap();
        } else if estimates.len() > 1 {
            writeln!(
                summary,
                "estimate reports have differing configurations: not pooled, per-file sections follow"
            )
            .unwrap();
        }
    }

    // Scalar pooled sections.
    if poolable {
        writeln!(summary, "\n== pooled ==").unwrap();
        let cylinders: Vec<&Estimate> = estimates
            .iter()
            .filter_map(|(_, r)| r.estimators.cylinder.as_ref().map(|c| &c.estimate))
            .collect();
        if cylinders.len() == estimates.len() {
            let spec = &estimates[0].1.estimators.cylinder.as_ref().unwrap().spec;
            let pooled = pool(&cylinders);
            writeln!(summary, "cylinder {spec}: {}", fmt_estimate(&pooled)).unwrap();
            for (path, r) in &estimates {
                let e = &r.estimators.cylinder.as_ref().unwrap().estimate;
                writeln!(summary, "  {path}: {}", fmt_estimate(e)).unwrap();
            }
        }
        let k0s: Vec<&Estimate> = estimates
            .iter()
            .filter_map(|(_, r)| r.estimators.cut.as_ref().map(|c| &c.report.k0))
            .collect();
        if k0s.len() == estimates.len() {
            writeln!(summary, "cut K0: {}", fmt_estimate(&pool(&k0s))).unwrap();
            let m2r: Vec<&Estimate> = estimates
                .iter()
                .map(|(_, r)| &r.estimators.cut.as_ref().unwrap().report.mean_2r)
                .collect();
            writeln!(summary, "cut E[2^R]: {}", fmt_estimate(&pool(&m2r))).unwrap();
        }
        // hn rows pooled per depth when every report carries the depth.
        if estimates.iter().all(|(_, r)| r.estimators.hn.is_some()) {
            let first = estimates[0].1.estimators.hn.as_ref().unwrap();
            writeln!(summary, "hn({}):", first.word).unwrap();
            for (di, row) in first.rows.iter().enumerate() {
                let ratios: Vec<&Estimate> = estimates
                    .iter()
                    .filter_map(|(_, r)| {
                        r.estimators
                            .hn
                            .as_ref()
                            .and_then(|h| h.rows.get(di).and_then(|row| row.hn.ratio.as_ref()))
                    })
                    .collect();
                if ratios.len() == estimates.len() {
                    let pooled = pool(&ratios);
                    writeln!(summary, "  depth {}: {}", row.depth, fmt_estimate(&pooled)).unwrap();
                    hn_rows.push(format!(
                        "pooled,{},{},{}",
                        row.depth, pooled.mean, pooled.std_error
                    ));
                } else {
                    writeln!(
                        summary,
                        "  depth {}: not estimable in every report; see per-file sections",
                        row.depth
                    )
                    .unwrap();
                }
            }
        }
        // Pooled curves, weighted by record counts.
        let mut tail_acc: BTreeMap<u64, u64> = BTreeMap::new();
        let mut total_records = 0u64;
        let mut have_tail = true;
        for (_, r) in &estimates {
            match &r.estimators.tail {
                Some(t) => {
                    total_records += r.n_records;
                    for p in &t.report.curve {
                        *tail_acc.entry(p.n).or_insert(0) += p.count;
                    }
                }
                None => have_tail = false,
            }
        }
        if have_tail && total_records > 0 {
            for (n, count) in &tail_acc {
                tail_rows.push(format!(
                    "pooled,{n},{count},{}",
                    *count as f64 / total_records as f64
                ));
            }
        }
    }

    // Per-file sections (always emitted: they carry fits and notes).
    for (path, r) in &estimates {
        writeln!(summary, "\n== {path} ==").unwrap();
        writeln!(
            summary,
            "records: {}, config key: {}, manifest: {}",
            r.n_records, r.config_key, r.manifest
        )
        .unwrap();
        for note in &r.notes {
            writeln!(summary, "note: {note}").unwrap();
        }
        if let Some(t) = &r.estimators.tail {
            match (&t.report.fit, t.k_envelope) {
                (Some(fit), Some(k)) => writeln!(
                    summary,
                    "tail fit: c = {:.4} +- {:.4} over {} points; envelope K = {:.4}",
                    fit.c, fit.c_std_error, fit.points, k
                )
                .unwrap(),
                _ => writeln!(summary, "tail fit: unavailable").unwrap(),
            }
            for p in &t.report.curve {
                tail_rows.push(format!("{path},{},{},{}", p.n, p.count, p.survival));
            }
        }
        if let Some(m) = &r.estimators.moments {
            for row in &m.rows {
                writeln!(
                    summary,
                    "moment n={}: {} vs bound {:.4} -> {}",
                    row.n,
                    fmt_estimate(&row.empirical),
                    row.bound,
                    if row.pass { "ok" } else { "EXCEEDED" }
                )
                .unwrap();
            }
        }
        if let Some(c) = &r.estimators.cut {
            writeln!(summary, "cut K0: {}", fmt_estimate(&c.report.k0)).unwrap();
            writeln!(summary, "cut E[2^R]: {}", fmt_estimate(&c.report.mean_2r)).unwrap();
            for (&(n, surv), &(_, bound)) in c.report.xi_survival.iter().zip(&c.h_bound) {
                xi_rows.push(format!("{path},{n},{surv},{bound}"));
            }
        }
        if let Some(cyl) = &r.estimators.cylinder {
            writeln!(
                summary,
                "cylinder {}: {}",
                cyl.spec,
                fmt_estimate(&cyl.estimate)
            )
            .unwrap();
        }
        if let Some(h) = &r.estimators.hn {
            for row in &h.rows {
                match &row.hn.ratio {
                    Some(e) => {
                        writeln!(summary, "hn depth {}: {}", row.depth, fmt_estimate(e)).unwrap();
                        hn_rows.push(format!("{path},{},{},{}", row.depth, e.mean, e.std_error));
                    }
                    None => {
                        writeln!(summary, "hn depth {}: not estimable", row.depth).unwrap();
                        hn_rows.push(format!("{path},{},,", row.depth));
                    }
                }
            }
            for gap in &h.gaps {
                if let Some(g) = &gap.paired {
                    writeln!(
                        summary,
                        "hn gap {} -> {}: log-gap {:.4} +- {:.4}",
                        gap.shallow, gap.deep, g.log_gap, g.std_error
                    )
                    .unwrap();
                }
            }
        }
    }

    for (path, s) in &scans {
        writeln!(summary, "\n== {path} ==").unwrap();
        writeln!(summary, "scan ({}):", s.label).unwrap();
        for b in &s.brackets {
            match b.bracket {
                Some((lo, hi)) => writeln!(
                    summary,
                    "volume {}: crossing of level {} inside ({lo}, {hi})",
                    b.volume, b.level
                )
                .unwrap(),
                None => writeln!(
                    summary,
                    "volume {}: no crossing of level {} on the grid",
                    b.volume, b.level
                )
                .unwrap(),
            }
        }
        for p in &s.points {
            scan_rows.push(format!(
                "{path},{},{},{},{},{},{}",
                p.volume,
                p.beta,
                p.largest_fraction.mean,
                p.largest_fraction.std_error,
                p.origin_spanning.mean,
                p.origin_spanning.std_error
            ));
        }
    }

    print!("{summary}");
    std::fs::write(run_dir.join("summary.txt"), &summary)
        .with_context(|| format!("writing {}", run_dir.join("summary.txt").display()))?;
    manifest.outputs.push("summary.txt".to_string());

    let id = manifest.manifest_id.clone();
    if !tail_rows.is_empty() {
        crate::write_csv(
            &run_dir.join("report-tail.csv"),
            &id,
            "source,n,count,survival",
            &tail_rows,
        )?;
        manifest.outputs.push("report-tail.csv".to_string());
    }
    if !xi_rows.is_empty() {
        crate::write_csv(
            &run_dir.join("report-xi.csv"),
            &id,
            "source,n,xi_survival,h_bound",
            &xi_rows,
        )?;
        manifest.outputs.push("report-xi.csv".to_string());
    }
    if !hn_rows.is_empty() {
        crate::write_csv(
            &run_dir.join("report-hn.csv"),
            &id,
            "source,depth,mean,std_error",
            &hn_rows,
        )?;
        manifest.outputs.push("report-hn.csv".to_string());
    }
    if !scan_rows.is_empty() {
        crate::write_csv(
            &run_dir.join("report-scan.csv"),
            &id,
            "source,volume,beta,largest_fraction,largest_fraction_se,origin_spanning,origin_spanning_se",
            &scan_rows,
        )?;
        manifest.outputs.push("report-scan.csv".to_string());
    }
    manifest.write(&run_dir, ctx.started)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, se: f64, n: u64) -> Estimate {
        Estimate {
            mean,
            std_error: se,
            n_samples: n,
            log_domain: false,
        }
    }

    #[test]
    fn pooled_error_is_narrower_than_each_input() {
        let a = est(1.0, 0.2, 100);
        let b = est(1.1, 0.3, 100);
        let pooled = pool(&[&a, &b]);
        assert!(pooled.std_error < a.std_error);
        assert!(pooled.std_error < b.std_error);
        assert!(pooled.mean > 1.0 && pooled.mean < 1.1);
        assert_eq!(pooled.n_samples, 200);
    }

    #[test]
    fn exact_inputs_dominate_pooling() {
        let a = est(2.0, 0.0, 10);
        let b = est(2.5, 0.4, 10);
        let pooled = pool(&[&a, &b]);
        assert_eq!(pooled.mean, 2.0);
        assert_eq!(pooled.std_error, 0.0);
    }

    #[test]
    fn equal_inputs_pool_to_themselves() {
        let a = est(0.5, 0.1, 50);
        let pooled = pool(&[&a, &a]);
        assert!((pooled.mean - 0.5).abs() < 1e-15);
        assert!((pooled.std_error - 0.1 / 2f64.sqrt()).abs() < 1e-15);
    }
}
