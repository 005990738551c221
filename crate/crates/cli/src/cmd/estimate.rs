//! `estimate`: fold estimators over recorded sweep streams and emit one JSON
//! report keyed by estimator name, plus CSV exports for the curves.
//!
//! Positional files form the primary stream (the two-sided / numerator
//! stream for `hn`); `--one-sided` files form the denominator stream.
//! Multi-file streams are concatenated in argument order.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dysonfk::couplings::SpinWord;
use dysonfk::estimators::{
    cluster_tail, cut_statistics, cylinder_probability, likelihood_ratio_hn, moment_check,
    paired_depth_gap, CutReport, Estimate, GapEstimate, HnEstimate, MomentRow, TailReport,
};
use dysonfk::sampler::SweepRecord;
use serde::{Deserialize, Serialize};

use crate::config::{parse_cylinder, parse_word, Resolver};
use crate::jsonl::read_records;
use crate::manifest::{prepare_run_dir, RunManifest};
use crate::{flag, Ctx};

pub const REPORT_SCHEMA: &str = "estimate-report-v1";

#[derive(Args)]
pub struct EstimateArgs {
    /// Sweep-record JSONL files (primary / two-sided stream).
    #[arg(required = true, value_name = "FILE")]
    pub files: Vec<PathBuf>,

    /// Comma list from {tail, moments, cut, cylinder, hn} (default
    /// `tail,moments,cut`).
    #[arg(long)]
    pub estimators: Option<String>,
    /// Cylinder specification `site:spin,...`, e.g. `0:+,2:-`.
    #[arg(long)]
    pub cylinder: Option<String>,
    /// Largest moment order checked against the fitted tail (default 4).
    #[arg(long)]
    pub moments_max: Option<u32>,
    /// Spin word for `hn`, e.g. `++-+`.
    #[arg(long)]
    pub word: Option<String>,
    /// Cylinder depths for `hn` (default `4,8,16,32`).
    #[arg(long)]
    pub depths: Option<String>,

    /// Denominator (one-sided) streams for `hn`.
    #[arg(long = "one-sided", value_name = "FILE")]
    pub one_sided: Vec<PathBuf>,

    /// Run directory (default `<out-dir>/estimate-<manifest-id>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl EstimateArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        flag(&mut map, "estimators", &self.estimators);
        flag(&mut map, "cylinder", &self.cylinder);
        flag(&mut map, "moments-max", &self.moments_max);
        flag(&mut map, "word", &self.word);
        flag(&mut map, "depths", &self.depths);
        map
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceInfo {
    pub path: String,
    pub manifest: String,
    pub config_key: String,
    pub chain: u64,
    pub records: u64,
    /// `primary` or `one-sided`.
    pub role: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailSection {
    #[serde(flatten)]
    pub report: TailReport,
    /// Envelope constant: max over the fit window of `survival * e^{c n}`.
    /// The fitted intercept undershoots at small n (the survival starts at
    /// 1), so bound checks use this constant instead.
    pub k_envelope: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentsSection {
    pub k: f64,
    pub c: f64,
    pub rows: Vec<MomentRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutSection {
    #[serde(flatten)]
    pub report: CutReport,
    /// Uniform convergence bound `(1/K0) xi(N>n) E[2^R]` per depth.
    pub h_bound: Vec<(i64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CylinderSection {
    pub spec: String,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HnRow {
    pub depth: u64,
    #[serde(flatten)]
    pub hn: HnEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapRow {
    pub shallow: u64,
    pub deep: u64,
    /// Paired refinement gap; absent when a batch mean vanishes on either
    /// stream (the gap is then not resolvable at this sample size).
    pub paired: Option<GapEstimate>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HnSection {
    pub word: String,
    pub rows: Vec<HnRow>,
    pub gaps: Vec<GapRow>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EstimatorSections {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinder: Option<CylinderSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hn: Option<HnSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: String,
    pub manifest: String,
    /// Common pooling key of the primary sources, or `mixed`.
    pub config_key: String,
    /// Canonical estimator parameters; reports pool only when these match.
    pub estimator_key: String,
    pub sources: Vec<SourceInfo>,
    pub n_records: u64,
    pub estimators: EstimatorSections,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Which {
    Tail,
    Moments,
    Cut,
    Cylinder,
    Hn,
}

fn parse_estimators(text: &str) -> Result<Vec<Which>> {
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let which = match name {
            "tail" => Which::Tail,
            "moments" => Which::Moments,
            "cut" => Which::Cut,
            "cylinder" => Which::Cylinder,
            "hn" => Which::Hn,
            other => bail!(
                "invalid value `{other}` for key `estimators`: expected a comma list from tail, moments, cut, cylinder, hn"
            ),
        };
        if !out.contains(&which) {
            out.push(which);
        }
    }
    if out.is_empty() {
        bail!("invalid value for key `estimators`: empty list");
    }
    Ok(out)
}

struct Stream {
    records: Vec<SweepRecord>,
    sources: Vec<SourceInfo>,
}

fn load_stream(files: &[PathBuf], role: &str) -> Result<Stream> {
    let mut records = Vec::new();
    let mut sources = Vec::new();
    for path in files {
        let (header, recs) = read_records(path)?;
        sources.push(SourceInfo {
            path: path.display().to_string(),
            manifest: header.manifest,
            config_key: header.config_key,
            chain: header.chain,
            records: recs.len() as u64,
            role: role.to_string(),
        });
        records.extend(recs);
    }
    Ok(Stream { records, sources })
}

/// Envelope constant over the fit window (points with >= 30 records):
/// `max survival * e^{c n}`, so that `survival <= K e^{-c n}` holds on the
/// window by construction and the moment bound inherits an honest constant.
pub fn tail_envelope(report: &TailReport) -> Option<f64> {
    let fit = report.fit.as_ref()?;
    let k = report
        .curve
        .iter()
        .take_while(|p| p.count >= 30)
        .map(|p| p.survival * (fit.c * p.n as f64).exp())
        .fold(f64::NAN, f64::max);
    k.is_finite().then_some(k)
}

pub fn run(ctx: &Ctx, args: EstimateArgs) -> Result<()> {
    let sections = &ctx.file_sections;
    let mut resolver = Resolver::new("estimate", sections, args.flag_map());
    let estimators =
        parse_estimators(&resolver.optional("estimators", "tail,moments,cut".to_string())?)?;
    let cylinder_spec: Option<String> = resolver.optional_only("cylinder")?;
    let moments_max: u32 = resolver.optional("moments-max", 4)?;
    let word_spec: Option<String> = resolver.optional_only("word")?;
    let depths: Vec<u64> = resolver.optional_list("depths", &[4, 8, 16, 32])?;
    let resolved = resolver.finish()?;

    let cylinder = cylinder_spec.as_deref().map(parse_cylinder).transpose()?;
    let word = word_spec
        .as_deref()
        .map(|w| parse_word(w).and_then(|s| SpinWord::new(s).map_err(Into::into)))
        .transpose()
        .context("invalid value for key `word`")?;
    if estimators.contains(&Which::Cylinder) && cylinder.is_none() {
        bail!("estimator `cylinder` requires key `cylinder` (e.g. --cylinder 0:+,2:-)");
    }
    if estimators.contains(&Which::Hn) {
        if word.is_none() {
            bail!("estimator `hn` requires key `word` (e.g. --word ++-+)");
        }
        if args.one_sided.is_empty() {
            bail!("estimator `hn` requires at least one --one-sided stream");
        }
        if depths.is_empty() {
            bail!("estimator `hn` requires a nonempty `depths` list");
        }
    }

    let primary = load_stream(&args.files, "primary")?;
    if primary.records.is_empty() {
        bail!("primary stream holds no records");
    }
    let denominator = if estimators.contains(&Which::Hn) {
        Some(load_stream(&args.one_sided, "one-sided")?)
    } else {
        None
    };

    let file_values = sections.get("estimate").cloned().unwrap_or_default();
    let mut manifest = RunManifest::new("estimate", resolved.clone(), file_values, args.flag_map());
    manifest.inputs = primary
        .sources
        .iter()
        .chain(denominator.iter().flat_map(|s| s.sources.iter()))
        .map(|s| s.path.clone())
        .collect();
    let run_dir = ctx.run_dir(args.out.as_deref(), "estimate", &manifest.manifest_id);
    prepare_run_dir(&run_dir)?;

    let mut out = EstimatorSections::default();
    let mut notes = Vec::new();

    for which in &estimators {
        match which {
            Which::Tail => {
                let report = cluster_tail(&primary.records)?;
                let k_envelope = tail_envelope(&report);
                if report.degenerate {
                    notes.push(
                        "tail: degenerate curve (origin cluster never exceeds size 1)".to_string(),
                    );
                }
                out.tail = Some(TailSection { report, k_envelope });
            }
            Which::Moments => {
                let tail = match &out.tail {
                    Some(t) => t.clone(),
                    None => {
                        let report = cluster_tail(&primary.records)?;
                        let k_envelope = tail_envelope(&report);
                        TailSection { report, k_envelope }
                    }
                };
                match (tail.report.fit.as_ref(), tail.k_envelope) {
                    (Some(fit), Some(k)) if fit.c > 0.0 => {
                        let rows = moment_check(&primary.records, moments_max, k, fit.c)?;
                        out.moments = Some(MomentsSection { k, c: fit.c, rows });
                    }
                    _ => notes.push(
                        "moments: skipped (no usable tail fit; need 3+ points with 30+ records and c > 0)"
                            .to_string(),
                    ),
                }
            }
            Which::Cut => {
                let report = cut_statistics(&primary.records)?;
                let h_bound = report.bound_curve();
                out.cut = Some(CutSection { report, h_bound });
            }
            Which::Cylinder => {
                let spec = cylinder.as_ref().expect("validated above");
                let estimate = cylinder_probability(spec, &primary.records)?;
                out.cylinder = Some(CylinderSection {
                    spec: cylinder_spec.clone().expect("validated above"),
                    estimate,
                });
            }
            Which::Hn => {
                let x = word.as_ref().expect("validated above");
                let denom = denominator.as_ref().expect("validated above");
                let mut rows = Vec::new();
                for &depth in &depths {
                    let hn =
                        likelihood_ratio_hn(x, depth as usize, &primary.records, &denom.records)?;
                    rows.push(HnRow { depth, hn });
                }
                let mut gaps = Vec::new();
                for pair in depths.windows(2) {
                    let (shallow, deep) = (pair[0] as usize, pair[1] as usize);
                    let paired =
                        paired_depth_gap(x, shallow, deep, &primary.records, &denom.records)?;
                    gaps.push(GapRow {
                        shallow: pair[0],
                        deep: pair[1],
                        paired,
                    });
                }
                out.hn = Some(HnSection {
                    word: word_spec.clone().expect("validated above"),
                    rows,
                    gaps,
                });
            }
        }
    }

    let first_key = primary.sources[0].config_key.clone();
    let config_key = if primary.sources.iter().all(|s| s.config_key == first_key) {
        first_key
    } else {
        notes.push("primary sources come from different sampling configurations".to_string());
        "mixed".to_string()
    };
    let estimator_key = resolved
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");

    let report = EstimateReport {
        schema: REPORT_SCHEMA.to_string(),
        manifest: manifest.manifest_id.clone(),
        config_key,
        estimator_key,
        sources: primary
            .sources
            .into_iter()
            .chain(denominator.into_iter().flat_map(|s| s.sources))
            .collect(),
        n_records: primary.records.len() as u64,
        estimators: out,
        notes,
    };
    crate::write_json(&run_dir.join("report.json"), &report)?;
    manifest.outputs.push("report.json".to_string());

    // CSV exports for the curves.
    if let Some(tail) = &report.estimators.tail {
        let rows: Vec<String> = tail
            .report
            .curve
            .iter()
            .map(|p| format!("{},{},{}", p.n, p.count, p.survival))
            .collect();
        crate::write_csv(
            &run_dir.join("tail.csv"),
            &manifest.manifest_id,
            "n,count,survival",
            &rows,
        )?;
        manifest.outputs.push("tail.csv".to_string());
    }
    if let Some(cut) = &report.estimators.cut {
        let rows: Vec<String> = cut
            .report
            .xi_survival
            .iter()
            .zip(&cut.h_bound)
            .map(|(&(n, surv), &(_, bound))| format!("{n},{surv},{bound}"))
            .collect();
        crate::write_csv(
            &run_dir.join("xi.csv"),
            &manifest.manifest_id,
            "n,xi_survival,h_bound",
            &rows,
        )?;
        manifest.outputs.push("xi.csv".to_string());
    }
    if let Some(hn) = &report.estimators.hn {
        let rows: Vec<String> = hn
            .rows
            .iter()
            .map(|r| match &r.hn.ratio {
                Some(e) => format!(
                    "{},{},{},{},{}",
                    r.depth, e.mean, e.std_error, r.hn.numerator_hits, r.hn.denominator_hits
                ),
                None => format!(
                    "{},,,{},{}",
                    r.depth, r.hn.numerator_hits, r.hn.denominator_hits
                ),
            })
            .collect();
        crate::write_csv(
            &run_dir.join("hn.csv"),
            &manifest.manifest_id,
            "depth,mean,std_error,numerator_hits,denominator_hits",
            &rows,
        )?;
        manifest.outputs.push("hn.csv".to_string());
    }

    manifest.write(&run_dir, ctx.started)?;
    println!(
        "estimate {}: {} record(s) -> {}",
        manifest.manifest_id,
        report.n_records,
        run_dir.display()
    );
    Ok(())
}
