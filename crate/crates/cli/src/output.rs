//! CSV writing with content hashes, and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    /// Data rows, header excluded.
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: String,
    pub files: Vec<FileRecord>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub config: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    /// The manifest already in `dir` when it was written for the same config, else a fresh one.
    pub fn load_or_new(dir: &Path, config: &BTreeMap<String, String>) -> Manifest {
        let existing = std::fs::read_to_string(dir.join(MANIFEST))
            .ok()
            .and_then(|text| serde_json::from_str::<Manifest>(&text).ok());
        match existing {
            Some(m) if &m.config == config => m,
            _ => Manifest {
                config: config.clone(),
                stages: BTreeMap::new(),
            },
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

/// Collects the files one stage writes.
pub struct Sink {
    dir: PathBuf,
    pub files: Vec<FileRecord>,
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn csv<R, S>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = Vec<S>>,
        S: AsRef<str>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let io = |e: csv::Error| CliError::Io {
            path: path.clone(),
            source: e.into(),
        };
        w.write_record(header).map_err(io)?;
        let mut n = 0;
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "{name}");
            w.write_record(row.iter().map(AsRef::as_ref)).map_err(io)?;
            n += 1;
        }
        let bytes = w.into_inner().expect("in-memory writer");
        self.raw(name, &bytes, n)
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        self.files.push(FileRecord {
            name: name.to_string(),
            rows,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn into_record(self, status: &str) -> StageRecord {
        StageRecord {
            status: status.to_string(),
            files: self.files,
            notes: self.notes,
        }
    }
}

pub fn f(v: f64) -> String {
    format!("{v}")
}

pub fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
