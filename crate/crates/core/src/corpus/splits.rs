use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::labels::{Emotion, LlmLabel};
use super::manifest::{check_unique_ids, Provenance, UtteranceRecord};
use crate::coremath::Rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldKind {
    Loso,
    Cross,
    Fixed,
}

/// One train/val/test partition, as utterance id lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    /// Speakers held out for testing (LOSO and fixed splits only).
    #[serde(default)]
    pub test_speakers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub kind: FoldKind,
    pub folds: Vec<Fold>,
}

fn sorted_speakers(records: &[UtteranceRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.speaker_id.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

fn ids_of<'a>(records: impl IntoIterator<Item = &'a UtteranceRecord>) -> Vec<String> {
    records.into_iter().map(|r| r.utterance_id.clone()).collect()
}

/// One fold per speaker (sorted by id): that speaker is the test set, the
/// rest train. Validation is left empty; see [`FoldPlan::with_speaker_validation`].
pub fn loso_folds(records: &[UtteranceRecord]) -> Result<FoldPlan> {
    check_unique_ids(records.iter().map(|r| r.utterance_id.as_str()))?;
    let speakers = sorted_speakers(records);
    if speakers.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            available: speakers.len(),
        });
    }
    let folds = speakers
        .iter()
        .map(|spk| Fold {
            name: format!("loso-{spk}"),
            train: ids_of(records.iter().filter(|r| &r.speaker_id != spk)),
            val: Vec::new(),
            test: ids_of(records.iter().filter(|r| &r.speaker_id == spk)),
            test_speakers: vec![spk.clone()],
        })
        .collect();
    Ok(FoldPlan {
        kind: FoldKind::Loso,
        folds,
    })
}

/// Fixed speaker-disjoint split: listed speakers go to test and val, the rest
/// to train.
pub fn speaker_split(records: &[UtteranceRecord], test_speakers: &[String], val_speakers: &[String]) -> Result<FoldPlan> {
    check_unique_ids(records.iter().map(|r| r.utterance_id.as_str()))?;
    if let Some(s) = test_speakers.iter().find(|s| val_speakers.contains(s)) {
        return Err(Error::InvalidConfig(format!("speaker {s} is in both test and val")));
    }
    let known = sorted_speakers(records);
    for s in test_speakers.iter().chain(val_speakers) {
        if !known.contains(s) {
            return Err(Error::InvalidConfig(format!("speaker {s} not in manifest")));
        }
    }
    let fold = Fold {
        name: "fixed".into(),
        train: ids_of(
            records
                .iter()
                .filter(|r| !test_speakers.contains(&r.speaker_id) && !val_speakers.contains(&r.speaker_id)),
        ),
        val: ids_of(records.iter().filter(|r| val_speakers.contains(&r.speaker_id))),
        test: ids_of(records.iter().filter(|r| test_speakers.contains(&r.speaker_id))),
        test_speakers: test_speakers.to_vec(),
    };
    if fold.train.is_empty() || fold.test.is_empty() {
        return Err(Error::Empty("fixed split leaves train or test empty".into()));
    }
    Ok(FoldPlan {
        kind: FoldKind::Fixed,
        folds: vec![fold],
    })
}

impl FoldPlan {
    /// For LOSO plans: moves the next speaker (cyclically, in sorted order)
    /// out of each fold's training set into its validation set.
    pub fn with_speaker_validation(mut self, records: &[UtteranceRecord]) -> Result<FoldPlan> {
        if self.kind != FoldKind::Loso {
            return Err(Error::InvalidConfig("speaker validation applies to LOSO plans only".into()));
        }
        let speakers = sorted_speakers(records);
        if speakers.len() < 3 {
            return Err(Error::TooFew {
                needed: 3,
                available: speakers.len(),
            });
        }
        let speaker_of: HashMap<&str, &str> = records
            .iter()
            .map(|r| (r.utterance_id.as_str(), r.speaker_id.as_str()))
            .collect();
        for fold in &mut self.folds {
            let test = &fold.test_speakers[0];
            let pos = speakers.iter().position(|s| s == test).ok_or_else(|| {
                Error::InvalidConfig(format!("fold speaker {test} not in records"))
            })?;
            let val_spk = speakers[(pos + 1) % speakers.len()].as_str();
            let (val, train): (Vec<String>, Vec<String>) = std::mem::take(&mut fold.train)
                .into_iter()
                .partition(|id| speaker_of.get(id.as_str()) == Some(&val_spk));
            fold.train = train;
            fold.val = val;
        }
        Ok(self)
    }

    /// Checks that each fold's parts are disjoint; for LOSO and fixed plans,
    /// also that no test speaker appears in train or val.
    pub fn validate(&self, records: &[UtteranceRecord]) -> Result<()> {
        let speaker_of: HashMap<&str, &str> = records
            .iter()
            .map(|r| (r.utterance_id.as_str(), r.speaker_id.as_str()))
            .collect();
        for fold in &self.folds {
            check_unique_ids(fold.train.iter().chain(&fold.val).chain(&fold.test).map(String::as_str))?;
            for id in fold.train.iter().chain(&fold.val) {
                let spk = speaker_of
                    .get(id.as_str())
                    .ok_or_else(|| Error::InvalidConfig(format!("fold {} references unknown id {id}", fold.name)))?;
                if fold.test_speakers.iter().any(|s| s == spk) {
                    return Err(Error::Degenerate(format!(
                        "fold {}: test speaker {spk} leaks into training",
                        fold.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Number of validation records: `val_fraction * n`, halves rounded up.
pub fn validation_count(n: usize, val_fraction: f64) -> usize {
    ((val_fraction * n as f64) + 0.5).floor().min(n as f64) as usize
}

/// Train on all of `train_corpus`; shuffle `eval_corpus` and split it into
/// validation (`val_fraction`) and test. When every eval record carries a gold
/// label the split is stratified by class, with the per-class quotas allocated
/// by largest remainder so that they sum to the overall validation count.
pub fn cross_corpus_split(
    train_corpus: &[UtteranceRecord],
    eval_corpus: &[UtteranceRecord],
    val_fraction: f64,
    rng: &Rng,
) -> Result<FoldPlan> {
    if train_corpus.is_empty() || eval_corpus.is_empty() {
        return Err(Error::Empty("cross-corpus split needs both corpora".into()));
    }
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(Error::InvalidConfig(format!("val_fraction {val_fraction} outside [0, 1]")));
    }
    check_unique_ids(eval_corpus.iter().map(|r| r.utterance_id.as_str()))?;
    let n = eval_corpus.len();
    let n_val = validation_count(n, val_fraction);

    let mut groups: BTreeMap<Option<Emotion>, Vec<String>> = BTreeMap::new();
    let stratify = eval_corpus.iter().all(|r| r.gold_label.is_some());
    for r in eval_corpus {
        let key = if stratify { r.gold_label } else { None };
        groups.entry(key).or_default().push(r.utterance_id.clone());
    }

    let quotas: Vec<(f64, usize)> = groups
        .values()
        .map(|ids| {
            let exact = ids.len() as f64 * n_val as f64 / n as f64;
            (exact - exact.floor(), exact.floor() as usize)
        })
        .collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.1).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].0.total_cmp(&quotas[a].0).then(a.cmp(&b)));
    let short = n_val - take.iter().sum::<usize>();
    for &g in order.iter().take(short) {
        take[g] += 1;
    }

    let (mut val, mut test) = (Vec::with_capacity(n_val), Vec::with_capacity(n - n_val));
    for (gi, mut ids) in groups.into_values().enumerate() {
        rng.fork(gi as u64).shuffle(&mut ids);
        let rest = ids.split_off(take[gi]);
        val.extend(ids);
        test.extend(rest);
    }
    Ok(FoldPlan {
        kind: FoldKind::Cross,
        folds: vec![Fold {
            name: "cross".into(),
            train: ids_of(train_corpus),
            val,
            test,
            test_speakers: Vec::new(),
        }],
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub base: usize,
    pub extra_input: usize,
    pub extra_kept: usize,
    pub unparseable_excluded: usize,
}

/// Base records (gold) plus LLM-labelled extras, each tagged with its
/// provenance. Unparseable extras are excluded and counted.
pub fn augment_merge(
    base: &[UtteranceRecord],
    extra: &[UtteranceRecord],
) -> Result<(Vec<UtteranceRecord>, AugmentReport)> {
    let mut report = AugmentReport {
        base: base.len(),
        extra_input: extra.len(),
        ..Default::default()
    };
    let mut merged = Vec::with_capacity(base.len() + extra.len());
    for r in base {
        if r.gold_label.is_none() {
            return Err(Error::MissingFeature {
                utterance_id: r.utterance_id.clone(),
                field: "gold_label".into(),
            });
        }
        let mut r = r.clone();
        r.provenance = Some(Provenance::Gold);
        merged.push(r);
    }
    for r in extra {
        match r.llm_label {
            None => {
                return Err(Error::MissingFeature {
                    utterance_id: r.utterance_id.clone(),
                    field: "llm_label".into(),
                })
            }
            Some(LlmLabel::Unparseable) => report.unparseable_excluded += 1,
            Some(LlmLabel::Emotion(_)) => {
                let mut r = r.clone();
                r.provenance = Some(Provenance::Llm);
                merged.push(r);
                report.extra_kept += 1;
            }
        }
    }
    check_unique_ids(merged.iter().map(|r| r.utterance_id.as_str()))?;
    Ok((merged, report))
}
