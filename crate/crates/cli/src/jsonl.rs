//! JSON-lines sweep-record streams.
//!
//! Each stream file starts with one header object naming its schema, the
//! manifest that produced it, the pooling key, and the chain index; every
//! following line is one serialised sweep record.  Streams are append-only
//! and written by a single writer per file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dysonfk::sampler::SweepRecord;
use serde::{Deserialize, Serialize};

pub const STREAM_SCHEMA: &str = "sweep-records-v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamHeader {
    pub schema: String,
    /// Manifest id of the producing run.
    pub manifest: String,
    /// Pooling key of the producing run (manifest id ignoring seed/chains).
    pub config_key: String,
    pub chain: u64,
}

pub struct RecordWriter {
    out: BufWriter<File>,
    path: PathBuf,
    written: u64,
}

impl RecordWriter {
    pub fn create(path: &Path, header: &StreamHeader) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            written: 0,
        };
        writer.line(&serde_json::to_string(header).expect("header serialises"))?;
        Ok(writer)
    }

    pub fn write(&mut self, record: &SweepRecord) -> Result<()> {
        self.written += 1;
        self.line(&serde_json::to_string(record).expect("record serialises"))
    }

    fn line(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|()| self.out.write_all(b"\n"))
            .with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn records_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<()> {
        self.out
            .flush()
            .with_context(|| format!("flushing {}", self.path.display()))
    }
}

/// Reads one stream file; parse failures name the file and line number.
pub fn read_records(path: &Path) -> Result<(StreamHeader, Vec<SweepRecord>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let Some((_, first)) = lines.next() else {
        bail!("{}: empty stream (missing header line)", path.display());
    };
    let first = first.with_context(|| format!("reading {}", path.display()))?;
    let header: StreamHeader = serde_json::from_str(&first)
        .with_context(|| format!("{}: line 1: malformed stream header", path.display()))?;
    if header.schema != STREAM_SCHEMA {
        bail!(
            "{}: schema mismatch: expected {STREAM_SCHEMA}, found {}",
            path.display(),
            header.schema
        );
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SweepRecord = serde_json::from_str(&line).with_context(|| {
            format!(
                "{}: line {}: malformed sweep record",
                path.display(),
                idx + 1
            )
        })?;
        records.push(record);
    }
    Ok((header, records))
}
