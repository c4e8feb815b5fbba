//! Report documents written by `train-classifier` and `augment-eval`, and
//! their validation.

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};
use serann::classifier::ClassifierConfig;
use serann::corpus::{
    mean_and_sample_std, AugmentReport, ConfusionMatrix, FoldKind, LabelSource, RunReport, REPORT_SCHEMA_VERSION,
};

/// Test results of one fold over all repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldSummary {
    pub name: String,
    pub test_speakers: Vec<String>,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Training records left out because their LLM label was unparseable.
    pub excluded_unparseable: usize,
    /// Test UAR per repeat, over the classes present in the fold's test set.
    pub uars: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Epoch whose weights were kept, per repeat.
    pub best_epochs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub report: String,
    pub label_source: LabelSource,
    pub fold_kind: FoldKind,
    pub repeats: usize,
    /// Per repeat: UAR of the test predictions pooled over all folds.
    pub overall: RunReport,
    pub folds: Vec<FoldSummary>,
    /// Pooled test confusion per repeat.
    pub confusions: Vec<ConfusionMatrix>,
    pub classifier: ClassifierConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentEvalReport {
    pub schema_version: u32,
    pub report: String,
    pub merge: AugmentReport,
    pub baseline: ExperimentReport,
    pub augmented: ExperimentReport,
    /// Augmented minus baseline UAR, per repeat (same seeds).
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
}

pub const EXPERIMENT_REPORT: &str = "experiment";
pub const AUGMENT_REPORT: &str = "augment-eval";

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn check_stats(what: &str, uars: &[f64], mean: f64, std: f64, repeats: usize) -> Result<()> {
    ensure!(uars.len() == repeats, "{what}: {} values for {repeats} repeats", uars.len());
    ensure!(
        uars.iter().all(|u| (0.0..=1.0).contains(u)),
        "{what}: UAR outside [0, 1]"
    );
    let (m, s) = mean_and_sample_std(uars)?;
    ensure!(close(m, mean) && close(s, std), "{what}: mean/std do not match the values");
    Ok(())
}

impl ExperimentReport {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.schema_version == REPORT_SCHEMA_VERSION, "unsupported schema_version {}", self.schema_version);
        ensure!(self.report == EXPERIMENT_REPORT, "report type {:?}", self.report);
        ensure!(self.repeats >= 1, "no repeats");
        let o = &self.overall;
        ensure!(o.schema_version == REPORT_SCHEMA_VERSION, "overall schema_version {}", o.schema_version);
        ensure!(o.seeds.len() == self.repeats, "{} seeds for {} repeats", o.seeds.len(), self.repeats);
        check_stats("overall", &o.uars, o.mean, o.std, self.repeats)?;
        ensure!(self.confusions.len() == self.repeats, "confusions per repeat missing");
        for (c, u) in self.confusions.iter().zip(&o.uars) {
            ensure!(close(c.uar()?, *u), "pooled confusion disagrees with overall UAR");
        }
        ensure!(!self.folds.is_empty(), "no folds");
        for f in &self.folds {
            check_stats(&f.name, &f.uars, f.mean, f.std, self.repeats)?;
            ensure!(f.best_epochs.len() == self.repeats, "{}: best epochs per repeat missing", f.name);
            ensure!(f.train_size > 0 && f.test_size > 0, "{}: empty split", f.name);
        }
        if self.fold_kind == FoldKind::Loso {
            let mut spk: Vec<&String> = self.folds.iter().flat_map(|f| &f.test_speakers).collect();
            let n = spk.len();
            spk.sort();
            spk.dedup();
            ensure!(spk.len() == n && n == self.folds.len(), "LOSO folds must test one distinct speaker each");
        }
        Ok(())
    }
}

impl AugmentEvalReport {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.schema_version == REPORT_SCHEMA_VERSION, "unsupported schema_version {}", self.schema_version);
        ensure!(self.report == AUGMENT_REPORT, "report type {:?}", self.report);
        self.baseline.validate()?;
        self.augmented.validate()?;
        ensure!(
            self.baseline.overall.seeds == self.augmented.overall.seeds,
            "baseline and augmented runs use different seeds"
        );
        let expect: Vec<f64> = self
            .augmented
            .overall
            .uars
            .iter()
            .zip(&self.baseline.overall.uars)
            .map(|(a, b)| a - b)
            .collect();
        ensure!(
            expect.len() == self.deltas.len() && expect.iter().zip(&self.deltas).all(|(a, b)| close(*a, *b)),
            "deltas do not match the two runs"
        );
        ensure!(close(mean_and_sample_std(&self.deltas)?.0, self.mean_delta), "mean_delta is wrong");
        let m = &self.merge;
        ensure!(m.extra_kept + m.unparseable_excluded == m.extra_input, "merge counts do not add up");
        Ok(())
    }
}

/// A parsed and validated report file of either kind.
#[derive(Clone, Debug)]
pub enum AnyReport {
    Experiment(ExperimentReport),
    Augment(AugmentEvalReport),
}

pub fn parse_report(text: &str) -> Result<AnyReport> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let kind = value.get("report").and_then(|v| v.as_str()).unwrap_or_default().to_string();
    let report = match kind.as_str() {
        EXPERIMENT_REPORT => AnyReport::Experiment(serde_json::from_value(value)?),
        AUGMENT_REPORT => AnyReport::Augment(serde_json::from_value(value)?),
        other => bail!("unknown report type {other:?}"),
    };
    match &report {
        AnyReport::Experiment(r) => r.validate()?,
        AnyReport::Augment(r) => r.validate()?,
    }
    Ok(report)
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Human-readable summary lines.
pub fn summarize(report: &AnyReport) -> Vec<String> {
    let exp = |name: &str, r: &ExperimentReport| {
        format!(
            "{name}: UAR {} +/- {} over {} repeats ({:?} folds, {} fold(s), labels {:?})",
            pct(r.overall.mean),
            pct(r.overall.std),
            r.repeats,
            r.fold_kind,
            r.folds.len(),
            r.label_source
        )
    };
    match report {
        AnyReport::Experiment(r) => {
            let mut out = vec![exp("experiment", r)];
            for f in &r.folds {
                out.push(format!("  {}: {} +/- {}", f.name, pct(f.mean), pct(f.std)));
            }
            out
        }
        AnyReport::Augment(r) => vec![
            exp("baseline", &r.baseline),
            exp("augmented", &r.augmented),
            format!(
                "delta: {} points ({} extra kept, {} unparseable excluded)",
                pct(r.mean_delta),
                r.merge.extra_kept,
                r.merge.unparseable_excluded
            ),
        ],
    }
}
