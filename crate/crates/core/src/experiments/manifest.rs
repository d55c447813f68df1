use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DATA_FILE: &str = "data.csv";
pub const LOG_FILE: &str = "log.txt";

/// `<package version> (<git describe>)` of the build.
pub fn code_version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("FRACTODAMP_GIT_DESCRIBE"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Classify,
    Kernels,
    Simulate,
    Decay,
    Curve,
    Lifespan,
    Testfn,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Classify => "classify",
            ExperimentKind::Kernels => "kernels",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Curve => "curve",
            ExperimentKind::Lifespan => "lifespan",
            ExperimentKind::Testfn => "testfn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub manifest: PathBuf,
    pub data: PathBuf,
    pub log: PathBuf,
}

/// Everything needed to reproduce one experiment.
///
/// The hash covers the kind, the parameters and the seed. Timestamp and code version are
/// recorded but left out, so a re-run of the same parameters is recognised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    pub hash: String,
    pub seed: u64,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default)]
    pub notes: Vec<String>,
    /// One line per failed acceptance threshold of the suite.
    #[serde(default)]
    pub failures: Vec<String>,
    pub outputs: Option<OutputPaths>,
    pub parameters: toml::Table,
}

impl ExperimentManifest {
    pub fn new<P: Serialize>(kind: ExperimentKind, parameters: &P, seed: u64) -> Result<Self> {
        let parameters = match toml::Value::try_from(parameters)? {
            toml::Value::Table(t) => t,
            other => {
                let mut t = toml::Table::new();
                t.insert("value".into(), other);
                t
            }
        };
        let hash = manifest_hash(kind, &parameters, seed)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            kind,
            hash,
            seed,
            code_version: code_version(),
            timestamp,
            notes: Vec::new(),
            failures: Vec::new(),
            outputs: None,
            parameters,
        })
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// `root/<kind>/<hash>`.
    pub fn directory(&self, root: &Path) -> PathBuf {
        root.join(self.kind.name()).join(&self.hash)
    }

    /// The directory of an earlier run with the same hash, if one was completed.
    pub fn existing(&self, root: &Path) -> Option<PathBuf> {
        let dir = self.directory(root);
        dir.join(MANIFEST_FILE).is_file().then_some(dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(toml::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Hex SHA-256 of the kind, the canonical (key-sorted) TOML of the parameters and the seed.
pub fn manifest_hash(kind: ExperimentKind, parameters: &toml::Table, seed: u64) -> Result<String> {
    let mut h = Sha256::new();
    h.update(kind.name().as_bytes());
    h.update(b"\n");
    h.update(toml::to_string(parameters)?.as_bytes());
    h.update(b"\n");
    h.update(seed.to_le_bytes());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// What to do when the output directory of a manifest already exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnExisting {
    /// Keep the earlier files and report them.
    #[default]
    Reuse,
    Refuse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Persisted {
    pub directory: PathBuf,
    pub manifest: ExperimentManifest,
    pub rows_written: usize,
    /// True when an earlier run was kept instead of writing.
    pub reused: bool,
}

/// Serializes rows to CSV with a leading `manifest` column holding the manifest hash.
pub fn rows_to_csv<R: Serialize>(hash: &str, rows: &[R]) -> Result<Vec<u8>> {
    let mut inner = csv::Writer::from_writer(Vec::new());
    for r in rows {
        inner.serialize(r)?;
    }
    let bytes = inner.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(&bytes[..]);
    let mut out = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        out.write_record(["manifest"])?;
    }
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let first = if i == 0 { "manifest" } else { hash };
        out.write_record(std::iter::once(first).chain(record.iter()))?;
    }
    out.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `manifest.toml`, `data.csv` and `log.txt` under `root/<kind>/<hash>`.
///
/// Files go to a scratch directory first and are moved into place with one rename, so a
/// manifest directory is either complete or absent. An existing directory is never
/// modified.
pub fn persist<R: Serialize>(
    root: &Path,
    manifest: &ExperimentManifest,
    rows: &[R],
    log: &[String],
    on_existing: OnExisting,
) -> Result<Persisted> {
    let dir = manifest.directory(root);
    let reuse = |dir: PathBuf| -> Result<Persisted> {
        match on_existing {
            OnExisting::Reuse => {
                let earlier = ExperimentManifest::load(&dir.join(MANIFEST_FILE))?;
                let rows_written = count_rows(&dir.join(DATA_FILE))?;
                Ok(Persisted {
                    directory: dir,
                    manifest: earlier,
                    rows_written,
                    reused: true,
                })
            }
            OnExisting::Refuse => Err(Error::config(format!(
                "{} already holds a run with this manifest",
                dir.display()
            ))),
        }
    };
    if let Some(dir) = manifest.existing(root) {
        return reuse(dir);
    }
    let parent = dir.parent().expect("manifest directory has a parent");
    fs::create_dir_all(parent)?;
    let scratch = parent.join(format!(".{}.partial-{}", manifest.hash, std::process::id()));
    if scratch.exists() {
        fs::remove_dir_all(&scratch)?;
    }
    fs::create_dir(&scratch)?;

    let mut m = manifest.clone();
    m.outputs = Some(OutputPaths {
        manifest: dir.join(MANIFEST_FILE),
        data: dir.join(DATA_FILE),
        log: dir.join(LOG_FILE),
    });
    write_new(&scratch.join(DATA_FILE), &rows_to_csv(&m.hash, rows)?)?;
    let mut text = log.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_new(&scratch.join(LOG_FILE), text.as_bytes())?;
    write_new(&scratch.join(MANIFEST_FILE), toml::to_string(&m)?.as_bytes())?;

    match fs::rename(&scratch, &dir) {
        Ok(()) => Ok(Persisted {
            directory: dir,
            manifest: m,
            rows_written: rows.len(),
            reused: false,
        }),
        Err(e) => {
            // Lost a race with a concurrent run of the same manifest.
            let _ = fs::remove_dir_all(&scratch);
            if dir.join(MANIFEST_FILE).is_file() {
                reuse(dir)
            } else {
                Err(e.into())
            }
        }
    }
}

fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = OpenOptions::new().write(true).create_new(true).open(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

fn count_rows(path: &Path) -> Result<usize> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut n = 0;
    for r in reader.records() {
        r?;
        n += 1;
    }
    Ok(n)
}
