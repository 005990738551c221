//! `sample`: run random-cluster chains (or the assembled two-sided product
//! sampler) and write one JSON-lines record stream per chain, plus a summary
//! and the run manifest.  Replaying a manifest reproduces the streams
//! byte-identically.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dysonfk::couplings::CouplingFamily;
use dysonfk::sampler::{Boundary, RcChain, RcConfig, RecordOptions, SweepRecord, XiSampler};
use serde::Serialize;

use crate::config::{resolve_family, Resolver};
use crate::jsonl::{RecordWriter, StreamHeader, STREAM_SCHEMA};
use crate::manifest::{prepare_run_dir, RunManifest};
use crate::{flag, flag_true, Ctx};

#[derive(Args)]
pub struct SampleArgs {
    /// Replay a previous run's manifest instead of resolving a new config.
    #[arg(long, value_name = "MANIFEST")]
    pub replay: Option<PathBuf>,

    /// Coupling kind: `dyson` or `finite`.
    #[arg(long)]
    pub coupling: Option<String>,
    /// Dyson decay exponent (requires alpha > 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Inverse temperature scale.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Finite-range couplings `J(0),J(1),...` (J(0) must be 0).
    #[arg(long = "J", value_name = "J0,J1,...")]
    pub j_values: Option<String>,

    /// One-sided volume [0, V); with --two-sided, [-V, V).
    #[arg(long)]
    pub volume: Option<u64>,
    /// Sample on the two-sided volume [-V, V).
    #[arg(long)]
    pub two_sided: bool,
    /// Cluster weight q (default 2).
    #[arg(long)]
    pub q: Option<f64>,
    /// Boundary condition: `free` or `wired`.
    #[arg(long)]
    pub boundary: Option<String>,
    /// `rc` (heat-bath chain) or `xi` (two independent one-sided chains
    /// assembled with fresh crossing edges per record).
    #[arg(long)]
    pub sampler: Option<String>,

    /// Post-burn-in sweeps per chain; one record every `thin` sweeps.
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Discarded equilibration sweeps per chain.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Sweeps between consecutive records (default 1).
    #[arg(long)]
    pub thin: Option<u64>,
    /// Base RNG seed (required: no silent entropy).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent chains (default 1).
    #[arg(long)]
    pub chains: Option<u64>,

    /// Record cluster labels for sites [0, front-window).
    #[arg(long)]
    pub front_window: Option<u32>,
    /// Record Edwards-Sokal spin words.
    #[arg(long)]
    pub keep_spins: bool,
    /// Record per-sweep cosh-product observables (one-sided only).
    #[arg(long)]
    pub cosh: bool,
    /// Spin forced on the boundary cluster under wired conditions (+1/-1).
    #[arg(long)]
    pub boundary_spin: Option<i8>,

    /// Run directory (default `<out-dir>/sample-<manifest-id>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SampleArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        flag(&mut map, "coupling", &self.coupling);
        flag(&mut map, "alpha", &self.alpha);
        flag(&mut map, "beta", &self.beta);
        flag(&mut map, "J", &self.j_values);
        flag(&mut map, "volume", &self.volume);
        flag_true(&mut map, "two-sided", self.two_sided);
        flag(&mut map, "q", &self.q);
        flag(&mut map, "boundary", &self.boundary);
        flag(&mut map, "sampler", &self.sampler);
        flag(&mut map, "sweeps", &self.sweeps);
        flag(&mut map, "burn-in", &self.burn_in);
        flag(&mut map, "thin", &self.thin);
        flag(&mut map, "seed", &self.seed);
        flag(&mut map, "chains", &self.chains);
        flag(&mut map, "front-window", &self.front_window);
        flag_true(&mut map, "keep-spins", self.keep_spins);
        flag_true(&mut map, "cosh", self.cosh);
        flag(&mut map, "boundary-spin", &self.boundary_spin);
        map
    }
}

enum SamplerKind {
    Rc,
    Xi,
}

struct SampleCfg {
    fam: CouplingFamily,
    lo: i64,
    hi: i64,
    volume: u64,
    q: f64,
    boundary: Boundary,
    sampler: SamplerKind,
    sweeps: u64,
    burn_in: u64,
    thin: u64,
    seed: u64,
    chains: u64,
    opts: RecordOptions,
}

fn resolve(r: &mut Resolver) -> Result<SampleCfg> {
    let fam = resolve_family(r)?;
    let volume: u64 = r.require("volume")?;
    if volume == 0 || volume > i64::MAX as u64 / 4 {
        bail!("invalid value for key `volume`: must be in 1..2^61");
    }
    let sampler = match r.optional("sampler", "rc".to_string())?.as_str() {
        "rc" => SamplerKind::Rc,
        "xi" => SamplerKind::Xi,
        other => bail!("invalid value `{other}` for key `sampler`: expected `rc` or `xi`"),
    };
    let two_sided = match sampler {
        SamplerKind::Xi => {
            // The assembled product sampler is two-sided by construction.
            r.forbid("two-sided", "sampler = xi (the volume is [-V, V) already)")?;
            r.forbid("boundary", "sampler = xi (both factor chains are free)")?;
            r.forbid("cosh", "sampler = xi (cosh observables are one-sided)")?;
            true
        }
        SamplerKind::Rc => r.optional_bool("two-sided", false)?,
    };
    let (lo, hi) = if two_sided {
        (-(volume as i64), volume as i64)
    } else {
        (0, volume as i64)
    };
    let q: f64 = r.optional("q", 2.0)?;
    let boundary = match sampler {
        SamplerKind::Xi => Boundary::Free,
        SamplerKind::Rc => match r.optional("boundary", "free".to_string())?.as_str() {
            "free" => Boundary::Free,
            "wired" => Boundary::Wired,
            other => {
                bail!("invalid value `{other}` for key `boundary`: expected `free` or `wired`")
            }
        },
    };
    let sweeps: u64 = r.require("sweeps")?;
    let burn_in: u64 = r.optional("burn-in", 0)?;
    let thin: u64 = r.optional("thin", 1)?;
    if thin == 0 {
        bail!("invalid value for key `thin`: must be >= 1");
    }
    if sweeps / thin == 0 {
        bail!("conflicting keys `sweeps` and `thin`: no records (sweeps < thin)");
    }
    let seed: u64 = r.require("seed")?;
    let chains: u64 = r.optional("chains", 1)?;
    if chains == 0 {
        bail!("invalid value for key `chains`: must be >= 1");
    }
    let cosh = match sampler {
        SamplerKind::Xi => false,
        SamplerKind::Rc => {
            let cosh = r.optional_bool("cosh", false)?;
            if cosh && two_sided {
                bail!("key `cosh` conflicts with `two-sided`: cosh observables are one-sided");
            }
            cosh
        }
    };
    let opts = RecordOptions {
        front_window: r.optional("front-window", 0)?,
        keep_spins: match sampler {
            SamplerKind::Xi => {
                r.forbid(
                    "keep-spins",
                    "sampler = xi (no joint spin word is assembled)",
                )?;
                false
            }
            SamplerKind::Rc => r.optional_bool("keep-spins", false)?,
        },
        boundary_spin: match boundary {
            Boundary::Wired => r.optional("boundary-spin", 1i8)?,
            Boundary::Free => {
                r.forbid("boundary-spin", "boundary = free")?;
                1
            }
        },
        cosh_observer: cosh,
    };
    if !matches!(opts.boundary_spin, 1 | -1) {
        bail!("invalid value for key `boundary-spin`: expected +1 or -1");
    }
    Ok(SampleCfg {
        fam,
        lo,
        hi,
        volume,
        q,
        boundary,
        sampler,
        sweeps,
        burn_in,
        thin,
        seed,
        chains,
        opts,
    })
}

#[derive(Serialize)]
struct ChainSummary {
    chain: u64,
    file: String,
    records: u64,
    final_sweep: u64,
    mean_clusters: f64,
    mean_edges: f64,
    mean_largest: f64,
}

#[derive(Serialize)]
struct SampleSummary {
    schema: &'static str,
    manifest: String,
    volume_lo: i64,
    volume_hi: i64,
    chains: Vec<ChainSummary>,
}

pub fn run(ctx: &Ctx, args: SampleArgs) -> Result<()> {
    let flags = args.flag_map();
    // Under replay the manifest's resolved map plays the role of the file
    // section with no overrides; it re-resolves to itself, so the manifest
    // id (and the record streams) repeat.  Provenance carries over.
    let (resolve_file, resolve_flags, file_values, flag_values) =
        if let Some(manifest_path) = &args.replay {
            if let Some(key) = flags.keys().next() {
                bail!("--replay uses the manifest's resolved configuration; drop `--{key}`");
            }
            let source = RunManifest::load(manifest_path)?;
            if source.subcommand != "sample" {
                bail!(
                    "{}: manifest records a `{}` run, not `sample`",
                    manifest_path.display(),
                    source.subcommand
                );
            }
            (
                source.resolved,
                BTreeMap::new(),
                source.file_values,
                source.flag_values,
            )
        } else {
            let file = ctx.file_sections.get("sample").cloned().unwrap_or_default();
            (file.clone(), flags.clone(), file, flags)
        };

    let mut sections = crate::config::FileSections::new();
    sections.insert("sample".to_string(), resolve_file);
    let mut resolver = Resolver::new("sample", &sections, resolve_flags);
    let cfg = resolve(&mut resolver)?;
    let resolved = resolver.finish()?;

    let mut manifest = RunManifest::new("sample", resolved, file_values, flag_values);
    let run_dir = ctx.run_dir(args.out.as_deref(), "sample", &manifest.manifest_id);
    prepare_run_dir(&run_dir)?;

    let records_per_chain = cfg.sweeps / cfg.thin;
    let mut summaries = Vec::with_capacity(cfg.chains as usize);
    for chain_id in 0..cfg.chains {
        let file_name = format!("chain-{chain_id:03}.jsonl");
        let header = StreamHeader {
            schema: STREAM_SCHEMA.to_string(),
            manifest: manifest.manifest_id.clone(),
            config_key: manifest.config_key.clone(),
            chain: chain_id,
        };
        let mut writer = RecordWriter::create(&run_dir.join(&file_name), &header)?;
        let mut sums = (0.0f64, 0.0f64, 0.0f64);
        let mut final_sweep = 0;
        let mut push = |writer: &mut RecordWriter, rec: SweepRecord| -> Result<()> {
            sums.0 += rec.clusters as f64;
            sums.1 += rec.edges as f64;
            sums.2 += rec.largest_cluster as f64;
            final_sweep = rec.sweep;
            writer.write(&rec)
        };
        match cfg.sampler {
            SamplerKind::Rc => {
                let rc_cfg = RcConfig::new(cfg.lo, cfg.hi, cfg.q, cfg.boundary, cfg.fam.clone())
                    .context("configuring the chain")?;
                let mut chain = RcChain::new(rc_cfg, cfg.seed, chain_id)?;
                chain.advance(cfg.burn_in);
                for _ in 0..records_per_chain {
                    chain.advance(cfg.thin - 1);
                    chain.sweep();
                    push(&mut writer, chain.record(&cfg.opts)?)?;
                }
            }
            SamplerKind::Xi => {
                let mut xi =
                    XiSampler::new(&cfg.fam, cfg.volume as i64, cfg.q, cfg.seed, chain_id)?;
                xi.advance(cfg.burn_in);
                for _ in 0..records_per_chain {
                    xi.advance(cfg.thin);
                    push(&mut writer, xi.record(cfg.opts.front_window)?)?;
                }
            }
        }
        let records = writer.records_written();
        writer.finish()?;
        let denom = records.max(1) as f64;
        summaries.push(ChainSummary {
            chain: chain_id,
            file: file_name.clone(),
            records,
            final_sweep,
            mean_clusters: sums.0 / denom,
            mean_edges: sums.1 / denom,
            mean_largest: sums.2 / denom,
        });
        manifest.outputs.push(file_name);
    }

    let summary = SampleSummary {
        schema: "sample-summary-v1",
        manifest: manifest.manifest_id.clone(),
        volume_lo: cfg.lo,
        volume_hi: cfg.hi,
        chains: summaries,
    };
    crate::write_json(&run_dir.join("summary.json"), &summary)?;
    manifest.outputs.push("summary.json".to_string());
    if let Some(path) = &args.replay {
        manifest.inputs.push(path.display().to_string());
    }
    manifest.write(&run_dir, ctx.started)?;
    println!(
        "sample {}: {} chain(s) x {} record(s) -> {}",
        manifest.manifest_id,
        cfg.chains,
        records_per_chain,
        run_dir.display()
    );
    Ok(())
}
