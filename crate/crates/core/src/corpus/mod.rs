//! Manifests, label mapping, evaluation splits and metrics, plus the
//! generated synthetic corpus.

mod labels;
mod manifest;
mod metrics;
mod splits;
pub mod synth;

pub use labels::{
    map_labels, published_class_counts, published_total, DropReport, Emotion, LabelMap, LlmLabel, MeldReading,
};
pub use manifest::{
    load_manifest, read_jsonl, write_jsonl, write_manifest, CorpusName, Gender, LabelSource, Manifest, Provenance,
    UtteranceRecord,
};
pub use metrics::{
    aggregate_runs, config_digest, mean_and_sample_std, ConfusionMatrix, RunReport, REPORT_SCHEMA_VERSION,
};
pub use splits::{
    augment_merge, cross_corpus_split, loso_folds, speaker_split, validation_count, AugmentReport, Fold, FoldKind,
    FoldPlan,
};
