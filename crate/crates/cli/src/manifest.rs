//! Run manifests: the reproducibility record written next to every output.
//!
//! A manifest stores the fully-resolved configuration in canonical text form
//! together with where the values came from (file vs. flags).  Replaying a
//! manifest re-resolves the same configuration, so integer-valued record
//! streams reproduce byte-identically; every output file carries the
//! manifest id so artifacts stay traceable after being moved.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA: &str = "run-manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Keys excluded from the pooling key: they select an independent stream of
/// the same law rather than a different law.
const STREAM_KEYS: &[&str] = &["seed", "chains"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub subcommand: String,
    /// Code version that produced the artifacts.
    pub version: String,
    /// Digest of (subcommand, resolved config); stable under replay.
    pub manifest_id: String,
    /// Digest ignoring seed/chains; estimates sharing it may be pooled.
    pub config_key: String,
    /// Canonical `key -> value` echo of every behaviour-affecting parameter.
    pub resolved: BTreeMap<String, String>,
    /// Raw values found in the config file section, for provenance.
    pub file_values: BTreeMap<String, String>,
    /// Raw flag overrides, for provenance.
    pub flag_values: BTreeMap<String, String>,
    /// Input artifacts (record streams, reports) consumed by the run.
    #[serde(default)]
    pub inputs: Vec<String>,
    /// Output files, relative to the manifest's directory.
    #[serde(default)]
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub finished_unix_ms: u64,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        resolved: BTreeMap<String, String>,
        file_values: BTreeMap<String, String>,
        flag_values: BTreeMap<String, String>,
    ) -> Self {
        let manifest_id = digest(subcommand, &resolved, &[]);
        let config_key = digest(subcommand, &resolved, STREAM_KEYS);
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            subcommand: subcommand.to_string(),
            version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            manifest_id,
            config_key,
            resolved,
            file_values,
            flag_values,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            finished_unix_ms: 0,
        }
    }

    /// Writes `manifest.json` into `run_dir`, stamping the wall clock.
    pub fn write(&mut self, run_dir: &Path, started: std::time::Instant) -> Result<PathBuf> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        self.finished_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let path = run_dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, body + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.schema != MANIFEST_SCHEMA {
            bail!(
                "{}: schema mismatch: expected {MANIFEST_SCHEMA}, found {}",
                path.display(),
                manifest.schema
            );
        }
        Ok(manifest)
    }
}

/// FNV-1a over the canonical `key=value` rendering; 16 hex digits.  This is
/// an identifier, not a cryptographic commitment.
fn digest(subcommand: &str, resolved: &BTreeMap<String, String>, skip: &[&str]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(subcommand.as_bytes());
    eat(b"\n");
    for (key, value) in resolved {
        if skip.contains(&key.as_str()) {
            continue;
        }
        eat(key.as_bytes());
        eat(b"=");
        eat(value.as_bytes());
        eat(b"\n");
    }
    format!("{hash:016x}")
}

/// Creates the run directory, refusing to clobber a previous run's manifest.
pub fn prepare_run_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        bail!(
            "{} already exists; choose a fresh --out directory",
            manifest.display()
        );
    }
    Ok(())
}
