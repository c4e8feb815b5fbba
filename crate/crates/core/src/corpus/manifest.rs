use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::{Emotion, LlmLabel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unknown,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusName {
    Iemocap,
    Mspimprov,
    Meld,
    Synthetic,
}

impl fmt::Display for CorpusName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusName::Iemocap => "iemocap",
            CorpusName::Mspimprov => "mspimprov",
            CorpusName::Meld => "meld",
            CorpusName::Synthetic => "synthetic",
        })
    }
}

/// Where a training label came from after augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Gold,
    Llm,
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    /// Relative to the manifest's directory unless absolute.
    pub audio_path: PathBuf,
    pub transcript: String,
    pub speaker_id: String,
    #[serde(default)]
    pub gender: Gender,
    pub corpus: CorpusName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Emotion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_label: Option<LlmLabel>,
    /// Label in the corpus' own taxonomy, before `map_labels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl UtteranceRecord {
    pub fn new(
        utterance_id: impl Into<String>,
        audio_path: impl Into<PathBuf>,
        transcript: impl Into<String>,
        speaker_id: impl Into<String>,
        corpus: CorpusName,
    ) -> Self {
        UtteranceRecord {
            utterance_id: utterance_id.into(),
            audio_path: audio_path.into(),
            transcript: transcript.into(),
            speaker_id: speaker_id.into(),
            gender: Gender::Unknown,
            corpus,
            gold_label: None,
            llm_label: None,
            source_label: None,
            provenance: None,
        }
    }

    /// The label a trainer should use: the LLM label for `llm` provenance,
    /// gold otherwise.
    pub fn training_label(&self, source: LabelSource) -> Option<Emotion> {
        match (source, self.provenance) {
            (_, Some(Provenance::Llm)) | (LabelSource::Llm, None) => self.llm_label.and_then(LlmLabel::emotion),
            _ => self.gold_label,
        }
    }
}

/// Which label column a trainer reads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    #[default]
    Gold,
    Llm,
}

/// Records plus the directory their relative audio paths resolve against.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<UtteranceRecord>,
}

impl Manifest {
    pub fn resolve_audio(&self, record: &UtteranceRecord) -> PathBuf {
        if record.audio_path.is_absolute() {
            record.audio_path.clone()
        } else {
            self.base_dir.join(&record.audio_path)
        }
    }

    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.records.iter().map(|r| r.speaker_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }
}

pub(crate) fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Reads a JSON-lines manifest. Blank lines are skipped; ids must be unique.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: UtteranceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.utterance_id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "empty utterance_id".into(),
            });
        }
        if !seen.insert(rec.utterance_id.clone()) {
            return Err(Error::DuplicateId(rec.utterance_id));
        }
        records.push(rec);
    }
    Ok(Manifest {
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        records,
    })
}

/// Writes any serializable rows as JSON lines.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads JSON lines into `T`, reporting the failing line number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    check_unique_ids(records.iter().map(|r| r.utterance_id.as_str()))?;
    write_jsonl(path, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        format!(
            r#"{{"utterance_id":"{id}","audio_path":"a/{id}.wav","transcript":"hello","speaker_id":"S1","gender":"female","corpus":"synthetic","gold_label":"sad"}}"#
        )
    }

    #[test]
    fn empty_file_is_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(load_manifest(&p).unwrap().records.is_empty());
    }

    #[test]
    fn three_lines_three_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, [line("a"), line("b"), line("c")].join("\n")).unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.resolve_audio(&m.records[0]), dir.path().join("a/a.wav"));
        assert_eq!(m.records[1].gender, Gender::Female);
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, [line("a"), line("x"), line("x")].join("\n")).unwrap();
        match load_manifest(&p) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, format!("{}\n{{\"utterance_id\":\"b\"}}\n", line("a"))).unwrap();
        match load_manifest(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("missing field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labels_outside_the_four_classes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, line("a").replace("\"sad\"", "\"bored\"")).unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Parse { line: 1, .. })));
    }
}
