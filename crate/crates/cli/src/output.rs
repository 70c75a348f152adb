//! Output files. Every file opens with a metadata header: `# key=value` lines
//! for CSV, a leading `{"meta":{...}}` object for JSON Lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub artifact: String,
    pub artifact_version: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Run-specific facts (controller, densities, node counts, ...).
    pub extra: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(artifact: &str, cfg: &RunConfig) -> Self {
        Self {
            artifact: artifact.into(),
            artifact_version: ARTIFACT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.into(), value.to_string());
        self
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("artifact={}", self.artifact),
            format!("artifact_version={}", self.artifact_version),
            format!("tool_version={}", self.tool_version),
            format!("config_sha256={}", self.config_sha256),
            format!("seed={}", self.seed),
        ];
        v.extend(self.extra.iter().map(|(k, x)| format!("{k}={x}")));
        v
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_csv<T: Serialize>(path: &Path, meta: &Meta, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for line in meta.comment_lines() {
        writeln!(w, "# {line}")?;
    }
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(BTreeMap<String, String>, Vec<T>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = BTreeMap::new();
    let mut reader = BufReader::new(f);
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(c) = line.strip_prefix("# ") {
            if let Some((k, v)) = c.trim_end().split_once('=') {
                header.insert(k.to_string(), v.to_string());
            }
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let rows = csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok((header, rows))
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: Meta,
}

pub fn write_jsonl<T: Serialize>(path: &Path, meta: &Meta, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &MetaLine { meta: meta.clone() })?;
    writeln!(w)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Meta, Vec<T>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(f).lines();
    let Some(first) = lines.next() else {
        bail!("{} is empty", path.display());
    };
    let meta: MetaLine = serde_json::from_str(&first?)
        .with_context(|| format!("{}: missing metadata line", path.display()))?;
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&l)
                .with_context(|| format!("{} line {}", path.display(), i + 2))?,
        );
    }
    Ok((meta.meta, rows))
}

/// The effective configuration, so a run can be repeated from its output
/// directory alone.
pub fn write_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    let mut w = create(path)?;
    let meta = Meta::new("config", cfg);
    for line in meta.comment_lines() {
        writeln!(w, "# {line}")?;
    }
    w.write_all(toml::to_string(&cfg.portable())?.as_bytes())?;
    w.flush()?;
    Ok(())
}
