//! Run manifests, input loading, and artifact writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use mmpca::corpus::{load_matrix_market, load_triplets_csv, LoadedCorpus};
use mmpca::TopicMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Everything needed to replay a run. `timing` is the only field that
/// differs between replays.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &impl Serialize,
        seed: u64,
        inputs: &[&Path],
        started: Instant,
    ) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: inputs
                .iter()
                .map(|p| digest(p))
                .collect::<anyhow::Result<_>>()?,
            timing: Timing {
                wall_seconds: started.elapsed().as_secs_f64(),
            },
        })
    }
}

pub fn digest(path: &Path) -> anyhow::Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

/// Loads a count matrix, choosing the reader by file extension.
pub fn load_corpus(path: &Path) -> anyhow::Result<LoadedCorpus> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let loaded = match ext.to_ascii_lowercase().as_str() {
        "mtx" => load_matrix_market(path),
        "csv" => load_triplets_csv(path),
        _ => bail!("{}: expected a .mtx or .csv count matrix", path.display()),
    }
    .with_context(|| format!("loading {}", path.display()))?;
    if loaded.remap.n_dropped() > 0 {
        log::warn!(
            "{} vocabulary columns without counts were dropped",
            loaded.remap.n_dropped()
        );
    }
    Ok(loaded)
}

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// `<prefix><suffix>` without treating a dot in the prefix as an extension.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// One row per vocabulary word: its name (or original column index) and
/// β_vk for each topic.
pub fn write_beta_csv(
    path: &Path,
    beta: &TopicMatrix,
    corpus: &LoadedCorpus,
) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["word".to_string()];
    header.extend((0..beta.n_topics()).map(|k| format!("topic_{k}")));
    wtr.write_record(&header)?;
    for v in 0..beta.n_words() {
        let name = match &corpus.vocabulary {
            Some(vocab) => vocab.terms()[v].clone(),
            None => corpus.remap.kept[v].to_string(),
        };
        let mut record = vec![name];
        record.extend((0..beta.n_topics()).map(|k| beta.get(v, k).to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
