use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::manifest::{CorpusName, UtteranceRecord};
use crate::error::{Error, Result};

/// The four-class emotion set. Discriminants are the class indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Angry = 0,
    Happy = 1,
    Neutral = 2,
    Sad = 3,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Angry, Emotion::Happy, Emotion::Neutral, Emotion::Sad];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Angry => "angry",
            Emotion::Happy => "happy",
            Emotion::Neutral => "neutral",
            Emotion::Sad => "sad",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown emotion {s:?}")))
    }
}

/// Two readings of the MELD class counts. The published per-class counts do
/// not add up to the published total unless "joy and anger (1607)" means joy
/// alone; the mapping itself is identical under both readings and only the
/// expected counts differ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeldReading {
    /// joy = 1607 and anger is the remainder of the 11353 total (2308).
    #[default]
    SeparateJoy,
    /// joy + anger = 1607 combined; the total is then 9045.
    CombinedJoyAnger,
}

/// Source-taxonomy to four-class mapping with an explicit drop list.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    pub corpus: CorpusName,
    mapped: BTreeMap<String, Emotion>,
    dropped: BTreeSet<String>,
}

impl LabelMap {
    pub fn new(corpus: CorpusName, mapped: &[(&str, Emotion)], dropped: &[&str]) -> Self {
        LabelMap {
            corpus,
            mapped: mapped.iter().map(|(k, v)| (k.to_ascii_lowercase(), *v)).collect(),
            dropped: dropped.iter().map(|k| k.to_ascii_lowercase()).collect(),
        }
    }

    /// Four categories plus "excited", folded into happy.
    pub fn iemocap() -> Self {
        use Emotion::*;
        Self::new(
            CorpusName::Iemocap,
            &[
                ("neu", Neutral),
                ("neutral", Neutral),
                ("hap", Happy),
                ("happy", Happy),
                ("happiness", Happy),
                ("exc", Happy),
                ("excited", Happy),
                ("ang", Angry),
                ("angry", Angry),
                ("anger", Angry),
                ("sad", Sad),
                ("sadness", Sad),
            ],
            &[
                "fru", "frustration", "frustrated", "sur", "surprise", "surprised", "fea", "fear", "dis", "disgust",
                "oth", "other", "xxx",
            ],
        )
    }

    pub fn msp_improv() -> Self {
        use Emotion::*;
        Self::new(
            CorpusName::Mspimprov,
            &[
                ("a", Angry),
                ("angry", Angry),
                ("anger", Angry),
                ("h", Happy),
                ("happy", Happy),
                ("n", Neutral),
                ("neutral", Neutral),
                ("s", Sad),
                ("sad", Sad),
            ],
            &["o", "other", "x", "none"],
        )
    }

    pub fn meld() -> Self {
        use Emotion::*;
        Self::new(
            CorpusName::Meld,
            &[
                ("neutral", Neutral),
                ("joy", Happy),
                ("sadness", Sad),
                ("anger", Angry),
            ],
            &["disgust", "surprise", "fear"],
        )
    }

    /// Identity map for corpora already labelled in the four classes.
    pub fn four_class(corpus: CorpusName) -> Self {
        let mapped: Vec<(&str, Emotion)> = Emotion::ALL.iter().map(|e| (e.as_str(), *e)).collect();
        Self::new(corpus, &mapped, &[])
    }

    pub fn for_corpus(corpus: CorpusName) -> Self {
        match corpus {
            CorpusName::Iemocap => Self::iemocap(),
            CorpusName::Mspimprov => Self::msp_improv(),
            CorpusName::Meld => Self::meld(),
            CorpusName::Synthetic => Self::four_class(corpus),
        }
    }

    /// `Some(label)` to keep, `None` to drop; unknown labels are an error.
    pub fn lookup(&self, source: &str) -> Result<Option<Emotion>> {
        let key = source.trim().to_ascii_lowercase();
        if let Some(e) = self.mapped.get(&key) {
            return Ok(Some(*e));
        }
        if self.dropped.contains(&key) {
            return Ok(None);
        }
        Err(Error::UnmappedLabel {
            corpus: self.corpus.to_string(),
            label: source.to_string(),
        })
    }
}

/// Published four-class sizes, `[angry, happy, neutral, sad]`.
pub fn published_class_counts(corpus: CorpusName, meld: MeldReading) -> Option<[usize; 4]> {
    match corpus {
        CorpusName::Iemocap => Some([1103, 1636, 1708, 1084]),
        CorpusName::Mspimprov => Some([792, 2644, 3477, 885]),
        CorpusName::Meld => match meld {
            MeldReading::SeparateJoy => Some([11353 - 1002 - 6436 - 1607, 1607, 6436, 1002]),
            // joy and anger cannot be separated under this reading.
            MeldReading::CombinedJoyAnger => None,
        },
        CorpusName::Synthetic => None,
    }
}

/// Published four-class total.
pub fn published_total(corpus: CorpusName, meld: MeldReading) -> Option<usize> {
    match (corpus, meld) {
        (CorpusName::Meld, MeldReading::CombinedJoyAnger) => Some(1607 + 6436 + 1002),
        _ => published_class_counts(corpus, meld).map(|c| c.iter().sum()),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub schema_version: u32,
    pub corpus: String,
    pub input: usize,
    pub kept: usize,
    pub dropped_total: usize,
    pub dropped: BTreeMap<String, usize>,
    pub class_counts: BTreeMap<Emotion, usize>,
}

/// Applies `map` to every record's `source_label`. Records without a source
/// label keep their existing gold label. `kept + dropped == input` always.
pub fn map_labels(records: Vec<UtteranceRecord>, map: &LabelMap) -> Result<(Vec<UtteranceRecord>, DropReport)> {
    let mut report = DropReport {
        schema_version: 1,
        corpus: map.corpus.to_string(),
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(records.len());
    for mut r in records {
        if let Some(src) = r.source_label.as_deref() {
            match map.lookup(src)? {
                Some(e) => r.gold_label = Some(e),
                None => {
                    *report.dropped.entry(src.trim().to_ascii_lowercase()).or_default() += 1;
                    report.dropped_total += 1;
                    continue;
                }
            }
        }
        if let Some(e) = r.gold_label {
            *report.class_counts.entry(e).or_default() += 1;
        }
        kept.push(r);
    }
    report.kept = kept.len();
    Ok((kept, report))
}

/// An LLM-assigned label: one of the four classes, or a reply that could not
/// be read as exactly one of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LlmLabel {
    Emotion(Emotion),
    Unparseable,
}

impl LlmLabel {
    pub const UNPARSEABLE: &'static str = "unparseable";

    pub fn emotion(self) -> Option<Emotion> {
        match self {
            LlmLabel::Emotion(e) => Some(e),
            LlmLabel::Unparseable => None,
        }
    }
}

impl fmt::Display for LlmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LlmLabel::Emotion(e) => e.fmt(f),
            LlmLabel::Unparseable => f.write_str(Self::UNPARSEABLE),
        }
    }
}

impl From<LlmLabel> for String {
    fn from(l: LlmLabel) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for LlmLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s.eq_ignore_ascii_case(Self::UNPARSEABLE) {
            Ok(LlmLabel::Unparseable)
        } else {
            s.parse().map(LlmLabel::Emotion)
        }
    }
}
