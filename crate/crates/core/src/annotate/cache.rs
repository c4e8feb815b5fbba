use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt_hash: String,
    pub backend_id: String,
    pub raw_response: String,
}

/// Append-only response store. Entries are looked up by prompt hash within
/// one backend, so switching backends never replays another's answers.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: HashMap<(String, String), String>,
    file: Option<(PathBuf, File)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists and appends new entries to it.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: CacheEntry = serde_json::from_str(&line).map_err(|err| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: err.to_string(),
                })?;
                entries.insert((e.backend_id, e.prompt_hash), e.raw_response);
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(ResponseCache {
            entries,
            file: Some((path.to_path_buf(), file)),
        })
    }

    pub fn get(&self, backend_id: &str, prompt_hash: &str) -> Option<&str> {
        self.entries
            .get(&(backend_id.to_string(), prompt_hash.to_string()))
            .map(String::as_str)
    }

    pub fn insert(&mut self, entry: CacheEntry) -> Result<()> {
        if let Some((path, f)) = &mut self.file {
            let line = serde_json::to_string(&entry).expect("cache entry serializes");
            writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| Error::io(path.clone(), e))?;
        }
        self.entries.insert((entry.backend_id, entry.prompt_hash), entry.raw_response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
