//! Fold-by-repeat classifier runs.

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use log::{debug, info};
use serann::classifier::{confusion, train_classifier, Classifier, ClassifierConfig, Example};
use serann::coremath::{Rng, Tensor};
use serann::corpus::{
    aggregate_runs, config_digest, cross_corpus_split, loso_folds, speaker_split, ConfusionMatrix, Fold, FoldKind,
    FoldPlan, LabelSource, LlmLabel, Provenance, UtteranceRecord, REPORT_SCHEMA_VERSION,
};
use serde::Serialize;

use crate::report::{ExperimentReport, FoldSummary, EXPERIMENT_REPORT};

#[derive(Clone, Debug)]
pub enum SplitSpec {
    /// One fold per speaker; the next speaker in sorted order validates.
    Loso,
    Fixed { test_speakers: Vec<String>, val_speakers: Vec<String> },
    /// Train on all training records; split `eval` into validation and test.
    Cross { eval: Vec<UtteranceRecord>, val_fraction: f64, seed: u64 },
}

impl SplitSpec {
    pub fn kind(&self) -> FoldKind {
        match self {
            SplitSpec::Loso => FoldKind::Loso,
            SplitSpec::Fixed { .. } => FoldKind::Fixed,
            SplitSpec::Cross { .. } => FoldKind::Cross,
        }
    }

    pub fn plan(&self, train: &[UtteranceRecord]) -> Result<FoldPlan> {
        let plan = match self {
            SplitSpec::Loso => loso_folds(train)?.with_speaker_validation(train)?,
            SplitSpec::Fixed {
                test_speakers,
                val_speakers,
            } => speaker_split(train, test_speakers, val_speakers)?,
            SplitSpec::Cross {
                eval,
                val_fraction,
                seed,
            } => cross_corpus_split(train, eval, *val_fraction, &Rng::new(*seed))?,
        };
        if plan.kind != FoldKind::Cross {
            plan.validate(train)?;
        }
        for f in &plan.folds {
            if f.val.is_empty() {
                bail!("fold {} has no validation records", f.name);
            }
        }
        Ok(plan)
    }

    /// Records that only ever appear in validation or test sets.
    pub fn eval_records(&self) -> &[UtteranceRecord] {
        match self {
            SplitSpec::Cross { eval, .. } => eval,
            _ => &[],
        }
    }
}

pub struct ExperimentSpec {
    pub classifier: ClassifierConfig,
    pub labels: LabelSource,
    pub seeds: Vec<u64>,
    /// Where to write `<fold>/repeat<NN>.ckpt`; nothing is written when unset.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    classifier: &'a ClassifierConfig,
    labels: LabelSource,
    fold_kind: FoldKind,
    folds: &'a [Fold],
}

struct FoldData<'a> {
    train: Vec<Example<'a>>,
    val: Vec<Example<'a>>,
    test: Vec<Example<'a>>,
    excluded: usize,
}

fn gold(r: &UtteranceRecord) -> Result<usize> {
    r.gold_label
        .map(|e| e.index())
        .ok_or_else(|| anyhow!("utterance {} has no gold label for evaluation", r.utterance_id))
}

fn fold_data<'a>(
    fold: &Fold,
    records: &HashMap<&str, &UtteranceRecord>,
    mels: &'a HashMap<String, Tensor>,
    labels: LabelSource,
) -> Result<FoldData<'a>> {
    let lookup = |id: &String| -> Result<(&UtteranceRecord, &'a Tensor)> {
        let r = records.get(id.as_str()).ok_or_else(|| anyhow!("fold references unknown utterance {id}"))?;
        let m = mels.get(id).ok_or_else(|| anyhow!("no mel spectrogram for utterance {id}"))?;
        Ok((r, m))
    };
    let mut train = Vec::with_capacity(fold.train.len());
    let mut excluded = 0;
    for id in &fold.train {
        let (r, m) = lookup(id)?;
        match r.training_label(labels) {
            Some(e) => train.push((m, e.index())),
            None if r.llm_label == Some(LlmLabel::Unparseable)
                && (labels == LabelSource::Llm || r.provenance == Some(Provenance::Llm)) =>
            {
                excluded += 1
            }
            None => bail!("utterance {id} has no {labels:?} label for training"),
        }
    }
    let eval = |ids: &[String]| -> Result<Vec<Example<'a>>> {
        ids.iter()
            .map(|id| {
                let (r, m) = lookup(id)?;
                Ok((m, gold(r)?))
            })
            .collect()
    };
    Ok(FoldData {
        train,
        val: eval(&fold.val)?,
        test: eval(&fold.test)?,
        excluded,
    })
}

/// Trains one classifier per fold and repeat and scores each on its test set.
/// Folds are planned on `train`; `extra` records join every fold's training
/// set and nothing else. `mels` must cover all records involved.
pub fn run_experiment(
    train: &[UtteranceRecord],
    extra: &[UtteranceRecord],
    split: &SplitSpec,
    mels: &HashMap<String, Tensor>,
    spec: &ExperimentSpec,
) -> Result<ExperimentReport> {
    spec.classifier.validate()?;
    if spec.seeds.is_empty() {
        bail!("no repeats requested");
    }
    let mut plan = split.plan(train)?;
    for f in &mut plan.folds {
        f.train.extend(extra.iter().map(|r| r.utterance_id.clone()));
    }
    let records: HashMap<&str, &UtteranceRecord> = train
        .iter()
        .chain(extra)
        .chain(split.eval_records())
        .map(|r| (r.utterance_id.as_str(), r))
        .collect();
    let data: Vec<FoldData> = plan
        .folds
        .iter()
        .map(|f| fold_data(f, &records, mels, spec.labels).with_context(|| format!("fold {}", f.name)))
        .collect::<Result<_>>()?;

    let k = spec.classifier.classes;
    let mut fold_uars = vec![Vec::new(); plan.folds.len()];
    let mut best_epochs = vec![Vec::new(); plan.folds.len()];
    let mut overall = Vec::with_capacity(spec.seeds.len());
    let mut confusions = Vec::with_capacity(spec.seeds.len());
    for (rep, &seed) in spec.seeds.iter().enumerate() {
        let mut pooled = ConfusionMatrix::four_class();
        for (fi, (fold, d)) in plan.folds.iter().zip(&data).enumerate() {
            let root = Rng::new(seed).fork(fi as u64);
            let model = Classifier::new(spec.classifier.clone(), &mut root.fork(0))?;
            let out = train_classifier(model, &d.train, &d.val, &mut root.fork(1), |e| {
                debug!(
                    "{} repeat {rep} epoch {}: loss {:.4}, val UAR {:.4}, lr {:e}",
                    fold.name, e.epoch, e.train_loss, e.val_uar, e.lr
                )
            })
            .with_context(|| format!("training fold {} repeat {rep}", fold.name))?;
            let cm = confusion(&out.model, &d.test)?;
            if cm.size() != k {
                bail!("classifier has {} classes, expected {k}", cm.size());
            }
            pooled.merge(&cm)?;
            let uar = cm.uar_present()?;
            info!(
                "{} repeat {rep} (seed {seed}): test UAR {uar:.4}, best epoch {}, stop {:?}",
                fold.name, out.best_epoch, out.stop
            );
            fold_uars[fi].push(uar);
            best_epochs[fi].push(out.best_epoch);
            if let Some(dir) = &spec.checkpoint_dir {
                let d = dir.join(&fold.name);
                std::fs::create_dir_all(&d)?;
                out.model.to_checkpoint().save(&d.join(format!("repeat{rep:02}.ckpt")))?;
            }
        }
        overall.push(pooled.uar()?);
        confusions.push(pooled);
    }

    let digest = config_digest(&DigestInput {
        classifier: &spec.classifier,
        labels: spec.labels,
        fold_kind: plan.kind,
        folds: &plan.folds,
    });
    let folds = plan
        .folds
        .iter()
        .zip(&data)
        .zip(fold_uars.into_iter().zip(best_epochs))
        .map(|((f, d), (uars, best))| {
            let agg = aggregate_runs(&uars, &digest, &spec.seeds)?;
            Ok(FoldSummary {
                name: f.name.clone(),
                test_speakers: f.test_speakers.clone(),
                train_size: d.train.len(),
                val_size: d.val.len(),
                test_size: d.test.len(),
                excluded_unparseable: d.excluded,
                uars,
                mean: agg.mean,
                std: agg.std,
                best_epochs: best,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        report: EXPERIMENT_REPORT.into(),
        label_source: spec.labels,
        fold_kind: plan.kind,
        repeats: spec.seeds.len(),
        overall: aggregate_runs(&overall, &digest, &spec.seeds)?,
        folds,
        confusions,
        classifier: spec.classifier.clone(),
    })
}
