//! Persistence: the URL dedupe cache and dataset manifests.
//!
//! Everything on disk is append-only JSON lines: diffable, language
//! agnostic, and crash tolerant (a partial trailing line from an interrupted
//! write is discarded on open). Rendered images live next to the records,
//! content-addressed by the SHA-256 of the page bytes. The dedupe key is the
//! normalized URL, not the content digest: the whole point of the cache is
//! to answer before fetching.
//!
//! Record schema, one object per line:
//! `{"url","digest","fetched_at","label","confidence","image"}`
//!
//! Manifest schema:
//! `{"path","label","category","source_url","digest","split"}`
//! (`source_url` and `split` optional).

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fetcher::NormalizedUrl;
use crate::{Error, Label, Result};

/// Environment variable selecting the store root; defaults to
/// `./phishvis-data`.
pub const HOME_ENV: &str = "PHISHVIS_HOME";

const RECORDS_FILE: &str = "records.jsonl";
const IMAGES_DIR: &str = "images";

/// One cached verdict for a normalized URL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlRecord {
    pub url: NormalizedUrl,
    /// SHA-256 of the fetched body bytes, 64 lowercase hex chars.
    pub digest: String,
    /// RFC 3339 UTC.
    pub fetched_at: String,
    pub label: Label,
    /// Classifier confidence in [0, 1].
    pub confidence: f64,
    /// Path of the stored PNG, relative to the store root.
    pub image: String,
}

/// Train/test split tag carried by corpus manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One dataset sample in a manifest. `path` is relative to the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub path: String,
    pub label: Label,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    /// SHA-256 of the image file bytes.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// SHA-256 as 64 lowercase hex chars.
pub fn content_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn is_valid_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// The on-disk URL cache. Single writer, append-only; the full record log
/// is kept in memory with a most-recent index per URL.
pub struct Store {
    root: PathBuf,
    records: Vec<UrlRecord>,
    latest: HashMap<String, usize>,
    writer: File,
    truncated_tail: bool,
}

impl Store {
    /// Open (creating if needed) the store at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let root = root.into();
        fs::create_dir_all(root.join(IMAGES_DIR))
            .map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
        let records_path = root.join(RECORDS_FILE);

        let mut records = Vec::new();
        let mut latest = HashMap::new();
        let mut truncated_tail = false;
        if records_path.exists() {
            let raw = fs::read(&records_path).map_err(|e| Error::StoreCorrupt(e.to_string()))?;
            let mut reader = BufReader::new(&raw[..]);
            let mut line = String::new();
            let mut offset = 0usize;
            let mut lineno = 0usize;
            loop {
                line.clear();
                let n = reader
                    .read_line(&mut line)
                    .map_err(|e| Error::StoreCorrupt(e.to_string()))?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                let at_end = offset + n == raw.len();
                offset += n;
                let trimmed = line.trim_end_matches(['\n', '\r']);
                if trimmed.is_empty() {
                    continue;
                }
                match serde_json::from_str::<UrlRecord>(trimmed) {
                    Ok(record) => {
                        latest.insert(record.url.as_str().to_string(), records.len());
                        records.push(record);
                    }
                    Err(e) => {
                        if at_end && !line.ends_with('\n') {
                            // interrupted final write; drop it and move on
                            truncated_tail = true;
                        } else {
                            return Err(Error::StoreCorrupt(format!(
                                "{}:{lineno}: {e}",
                                records_path.display()
                            )));
                        }
                    }
                }
            }
        }

        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&records_path)
            .map_err(|e| Error::StoreWriteFailed(e.to_string()))?;

        Ok(Store {
            root,
            records,
            latest,
            writer,
            truncated_tail,
        })
    }

    /// Open the store at `$PHISHVIS_HOME`, or `./phishvis-data` if unset.
    pub fn open_default() -> Result<Store> {
        let root = std::env::var_os(HOME_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("phishvis-data"));
        Store::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// True when a partial trailing line was discarded on open.
    pub fn recovered_truncated_tail(&self) -> bool {
        self.truncated_tail
    }

    /// Most recent record for a URL, if any.
    pub fn lookup(&self, url: &NormalizedUrl) -> Option<&UrlRecord> {
        self.latest.get(url.as_str()).map(|&i| &self.records[i])
    }

    /// Append a record. The referenced image must already exist under the
    /// store root.
    pub fn put(&mut self, record: UrlRecord) -> Result<()> {
        if !(0.0..=1.0).contains(&record.confidence) {
            return Err(Error::InvalidRecord(format!(
                "confidence {} outside [0, 1]",
                record.confidence
            )));
        }
        if !is_valid_digest(&record.digest) {
            return Err(Error::InvalidRecord(format!(
                "digest {:?} is not 64 lowercase hex chars",
                record.digest
            )));
        }
        if !self.root.join(&record.image).is_file() {
            return Err(Error::InvalidRecord(format!(
                "image file {:?} does not exist in the store",
                record.image
            )));
        }
        let mut line =
            serde_json::to_string(&record).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
        self.latest
            .insert(record.url.as_str().to_string(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// All records in append order.
    pub fn records(&self) -> &[UrlRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Write image bytes content-addressed under `images/<digest>.png` and
    /// return the root-relative path. Idempotent for identical bytes.
    pub fn save_image(&self, digest: &str, bytes: &[u8]) -> Result<String> {
        let rel = format!("{IMAGES_DIR}/{digest}.png");
        let path = self.root.join(&rel);
        if !path.exists() {
            fs::write(&path, bytes).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
        }
        Ok(rel)
    }
}

/// Load a full manifest. A malformed line fails with its 1-based number.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut samples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str::<Sample>(&line).map_err(|e| Error::ManifestParse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Append one sample to a manifest, creating the file if needed.
pub fn append_manifest(path: impl AsRef<Path>, sample: &Sample) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path.as_ref())
        .map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
    let mut line =
        serde_json::to_string(sample).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
    line.push('\n');
    file.write_all(line.as_bytes())
        .map_err(|e| Error::StoreWriteFailed(e.to_string()))
}
