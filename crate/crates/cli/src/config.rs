//! Configuration layer shared by every subcommand.
//!
//! Values come from three places, in increasing precedence: built-in
//! defaults, a plain-text config file (`key = value` lines grouped under one
//! `[section]` per subcommand), and command-line flags.  Unknown sections and
//! unknown keys are rejected with a diagnostic naming them; every consumed
//! key is echoed in canonical form so the run manifest can reproduce the run
//! exactly.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dysonfk::couplings::CouplingFamily;

/// Allowed keys per section.  Sections are named after subcommands; a config
/// file may hold sections for several subcommands at once and each is
/// validated against this registry even when not executed.
pub const SECTIONS: &[(&str, &[&str])] = &[
    (
        "sample",
        &[
            "coupling",
            "alpha",
            "beta",
            "J",
            "volume",
            "two-sided",
            "q",
            "boundary",
            "sampler",
            "sweeps",
            "burn-in",
            "thin",
            "seed",
            "chains",
            "front-window",
            "keep-spins",
            "cosh",
            "boundary-spin",
        ],
    ),
    (
        "estimate",
        &["estimators", "cylinder", "moments-max", "word", "depths"],
    ),
    (
        "eigen",
        &["coupling", "alpha", "beta", "J", "m", "tol", "max-iters"],
    ),
    (
        "verify",
        &["coupling", "alpha", "beta", "J", "L", "range-cutoff"],
    ),
    (
        "scan",
        &[
            "coupling",
            "alpha",
            "J",
            "beta-grid",
            "volumes",
            "sweeps",
            "burn-in",
            "seed",
            "level",
        ],
    ),
    ("report", &[]),
];

pub fn declared_keys(section: &str) -> Option<&'static [&'static str]> {
    SECTIONS
        .iter()
        .find(|(name, _)| *name == section)
        .map(|(_, keys)| *keys)
}

/// Parsed config file: one `key = value` map per section, already validated
/// against the section registry.
pub type FileSections = BTreeMap<String, BTreeMap<String, String>>;

pub fn parse_config_file(path: &Path) -> Result<FileSections> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    parse_config_text(&text).with_context(|| format!("in config file {}", path.display()))
}

pub fn parse_config_text(text: &str) -> Result<FileSections> {
    let mut sections = FileSections::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {lineno}: unterminated section header `{line}`"))?
                .trim()
                .to_string();
            if declared_keys(&name).is_none() {
                bail!(
                    "line {lineno}: unknown section [{name}]; expected one of {}",
                    section_names()
                );
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {lineno}: expected `key = value`, got `{line}`");
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(section) = current.as_ref() else {
            bail!("line {lineno}: key `{key}` appears before any [section] header");
        };
        let allowed = declared_keys(section).expect("section validated on entry");
        if !allowed.contains(&key.as_str()) {
            bail!("line {lineno}: unknown key `{key}` in section [{section}]");
        }
        let map = sections.get_mut(section).expect("section inserted");
        if map.insert(key.clone(), value).is_some() {
            bail!("line {lineno}: duplicate key `{key}` in section [{section}]");
        }
    }
    Ok(sections)
}

fn section_names() -> String {
    SECTIONS
        .iter()
        .map(|(name, _)| format!("[{name}]"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Resolves one subcommand's configuration from file values plus flag
/// overrides, recording the canonical form of every consumed key.
pub struct Resolver {
    section: &'static str,
    file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(
        section: &'static str,
        file_sections: &FileSections,
        flags: BTreeMap<String, String>,
    ) -> Self {
        let file = file_sections.get(section).cloned().unwrap_or_default();
        Self {
            section,
            file,
            flags,
            resolved: BTreeMap::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        debug_assert!(
            declared_keys(self.section).is_some_and(|keys| keys.contains(&key)),
            "key `{key}` missing from the [{section}] registry",
            section = self.section
        );
        // Consume the key from both sources: a flag override shadows the
        // file value rather than leaving it behind as an unused key.
        let from_file = self.file.remove(key);
        self.flags.remove(key).or(from_file)
    }

    /// True when the key is present from either source (without consuming it).
    pub fn is_set(&self, key: &str) -> bool {
        self.flags.contains_key(key) || self.file.contains_key(key)
    }

    /// Rejects a key that conflicts with already-resolved choices.
    pub fn forbid(&mut self, key: &str, reason: &str) -> Result<()> {
        if self.is_set(key) {
            bail!(
                "key `{key}` in section [{section}] conflicts with {reason}",
                section = self.section
            );
        }
        Ok(())
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn parse<T>(&self, key: &str, raw: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        raw.parse::<T>().map_err(|e| {
            anyhow!(
                "invalid value `{raw}` for key `{key}` in section [{section}]: {e}",
                section = self.section
            )
        })
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let raw = self.raw(key).ok_or_else(|| {
            anyhow!(
                "missing required key `{key}` in section [{section}] (set it in the config file or pass --{key})",
                section = self.section
            )
        })?;
        let value: T = self.parse(key, &raw)?;
        self.record(key, &value);
        Ok(value)
    }

    pub fn optional<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.raw(key) {
            Some(raw) => self.parse(key, &raw)?,
            None => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Optional key with no default; absent keys are not echoed.
    pub fn optional_only<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.raw(key) {
            Some(raw) => {
                let value: T = self.parse(key, &raw)?;
                self.record(key, &value);
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    pub fn optional_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        let value = match self.raw(key) {
            Some(raw) => match raw.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                other => bail!(
                    "invalid value `{other}` for key `{key}` in section [{section}]: expected true/false",
                    section = self.section
                ),
            },
            None => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Comma-separated list; the canonical echo re-joins parsed items.
    pub fn require_list<T>(&mut self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let raw = self.raw(key).ok_or_else(|| {
            anyhow!(
                "missing required key `{key}` in section [{section}]",
                section = self.section
            )
        })?;
        let items = self.parse_list(key, &raw)?;
        self.record_list(key, &items);
        Ok(items)
    }

    pub fn optional_list<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let items = match self.raw(key) {
            Some(raw) => self.parse_list(key, &raw)?,
            None => default.to_vec(),
        };
        self.record_list(key, &items);
        Ok(items)
    }

    fn parse_list<T>(&self, key: &str, raw: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse(key, s))
            .collect()
    }

    fn record_list<T: Display>(&mut self, key: &str, items: &[T]) {
        let joined = items.iter().map(T::to_string).collect::<Vec<_>>().join(",");
        self.resolved.insert(key.to_string(), joined);
    }

    /// Validates that nothing was left over and returns the canonical echo.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(key) = self.flags.keys().next() {
            bail!(
                "key `{key}` does not apply to the resolved [{section}] configuration",
                section = self.section
            );
        }
        if let Some(key) = self.file.keys().next() {
            bail!(
                "key `{key}` in section [{section}] does not apply to the resolved configuration",
                section = self.section
            );
        }
        Ok(self.resolved)
    }
}

/// Coupling family shape with the inverse temperature left open (the `scan`
/// subcommand varies it along a grid).
#[derive(Clone, Debug)]
pub enum FamilyKind {
    Dyson { alpha: f64 },
    Finite { values: Vec<f64> },
}

impl FamilyKind {
    pub fn family_core(&self, beta: f64) -> dysonfk::Result<CouplingFamily> {
        match self {
            FamilyKind::Dyson { alpha } => CouplingFamily::dyson(*alpha, beta),
            FamilyKind::Finite { values } => CouplingFamily::finite_range(values.clone(), beta),
        }
    }

    pub fn family(&self, beta: f64) -> Result<CouplingFamily> {
        self.family_core(beta)
            .map_err(|e| anyhow!("invalid coupling family: {e}"))
    }
}

/// Resolves `coupling` / `alpha` / `J`, rejecting the key that does not
/// belong to the chosen kind.
pub fn resolve_family_kind(r: &mut Resolver) -> Result<FamilyKind> {
    let coupling: String = r.optional("coupling", "dyson".to_string())?;
    match coupling.as_str() {
        "dyson" => {
            r.forbid("J", "coupling = dyson (use alpha instead)")?;
            let alpha: f64 = r.require("alpha")?;
            Ok(FamilyKind::Dyson { alpha })
        }
        "finite" => {
            r.forbid("alpha", "coupling = finite (use J instead)")?;
            let values: Vec<f64> = r.require_list("J")?;
            Ok(FamilyKind::Finite { values })
        }
        other => bail!("invalid value `{other}` for key `coupling`: expected `dyson` or `finite`"),
    }
}

/// Resolves a full family including `beta`.
pub fn resolve_family(r: &mut Resolver) -> Result<CouplingFamily> {
    let kind = resolve_family_kind(r)?;
    let beta: f64 = r.require("beta")?;
    kind.family(beta)
}

/// Spin word literal: one `+` or `-` per coordinate, e.g. `++-+`.
pub fn parse_word(text: &str) -> Result<Vec<i8>> {
    text.chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => bail!("invalid spin `{other}` in word `{text}` (expected `+` or `-`)"),
        })
        .collect()
}

/// Cylinder literal `site:spin,...`, e.g. `0:+,2:-`.
pub fn parse_cylinder(text: &str) -> Result<Vec<(i64, i8)>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (site, spin) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("invalid cylinder entry `{part}` (expected `site:spin`)"))?;
        let site: i64 = site
            .trim()
            .parse()
            .map_err(|e| anyhow!("invalid site `{site}` in cylinder `{text}`: {e}"))?;
        let spin = match spin.trim() {
            "+" | "+1" => 1,
            "-" | "-1" => -1,
            other => bail!("invalid spin `{other}` in cylinder `{text}` (expected + or -)"),
        };
        out.push((site, spin));
    }
    if out.is_empty() {
        bail!("empty cylinder specification");
    }
    Ok(out)
}
