//! On-disk artifacts passed between commands.
//!
//! A features directory holds `features.jsonl` (energy and pitch per
//! utterance) and `mels/`, one checkpoint-format file per utterance.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serann::annotate::AnnotationResult;
use serann::coremath::{Checkpoint, Tensor};
use serann::corpus::{config_digest, load_manifest, read_jsonl, write_jsonl, Manifest, UtteranceRecord};
use serann::dsp::{FeatureRecord, MelSpec};
use serann::vqvae::CodesRecord;
use serde::Serialize;

pub const FEATURES_FILE: &str = "features.jsonl";
pub const MEL_DIR: &str = "mels";
pub const FAILURES_FILE: &str = "failures.jsonl";

/// File name for an utterance id. Ids that are not plain file names get a
/// digest suffix so that distinct ids never share a file.
pub fn mel_file_name(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if clean == id && !id.starts_with('.') {
        format!("{id}.mel")
    } else {
        format!("{clean}-{}.mel", &config_digest(&id)[..12])
    }
}

pub fn write_mel(dir: &Path, id: &str, mel: &MelSpec) -> Result<()> {
    let mut ck = Checkpoint::new(serde_json::json!({ "kind": "mel", "utterance_id": id }).to_string());
    ck.push("mel", mel.tensor());
    let path = dir.join(MEL_DIR).join(mel_file_name(id));
    ck.save(&path).with_context(|| format!("writing {}", path.display()))
}

/// Mel spectrograms looked up across one or more features directories.
#[derive(Clone, Debug)]
pub struct MelStore {
    dirs: Vec<PathBuf>,
}

impl MelStore {
    pub fn new(dirs: &[PathBuf]) -> Result<Self> {
        if dirs.is_empty() {
            bail!("at least one --features directory is required");
        }
        for d in dirs {
            if !d.join(MEL_DIR).is_dir() {
                bail!("{} is not a features directory (no {MEL_DIR}/)", d.display());
            }
        }
        Ok(MelStore { dirs: dirs.to_vec() })
    }

    pub fn load(&self, id: &str) -> Result<MelSpec> {
        let name = mel_file_name(id);
        let path = self
            .dirs
            .iter()
            .map(|d| d.join(MEL_DIR).join(&name))
            .find(|p| p.is_file())
            .ok_or_else(|| anyhow!("no mel spectrogram for utterance {id}"))?;
        let ck = Checkpoint::load(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(MelSpec::from_tensor(ck.get("mel")?.clone())?)
    }

    /// Mels for `records`, keyed by utterance id.
    pub fn load_all<'a>(&self, records: impl IntoIterator<Item = &'a UtteranceRecord>) -> Result<HashMap<String, Tensor>> {
        records
            .into_iter()
            .map(|r| Ok((r.utterance_id.clone(), self.load(&r.utterance_id)?.into_tensor())))
            .collect()
    }

    /// Energy and pitch rows from every directory.
    pub fn features(&self) -> Result<Vec<FeatureRecord>> {
        let mut out = Vec::new();
        for d in &self.dirs {
            out.extend(read_features(d)?);
        }
        Ok(out)
    }
}

pub fn read_features(dir: &Path) -> Result<Vec<FeatureRecord>> {
    let path = dir.join(FEATURES_FILE);
    Ok(read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?)
}

pub fn read_codes(path: &Path) -> Result<Vec<CodesRecord>> {
    Ok(read_jsonl(path).with_context(|| format!("reading {}", path.display()))?)
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationResult>> {
    Ok(read_jsonl(path).with_context(|| format!("reading {}", path.display()))?)
}

pub fn open_manifest(path: &Path) -> Result<Manifest> {
    load_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

/// Records with audio paths made absolute, for manifests written elsewhere.
pub fn rebased(manifest: &Manifest) -> Vec<UtteranceRecord> {
    manifest
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let p = manifest.resolve_audio(&r);
            r.audio_path = std::path::absolute(&p).unwrap_or(p);
            r
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_jsonl(path, rows).with_context(|| format!("writing {}", path.display()))
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_are_safe_and_distinct() {
        assert_eq!(mel_file_name("S01_angry_00"), "S01_angry_00.mel");
        let a = mel_file_name("a/b");
        let b = mel_file_name("a_b");
        assert!(!a.contains('/'));
        assert_ne!(a, b);
        assert_ne!(mel_file_name(".."), "...mel");
    }
}
