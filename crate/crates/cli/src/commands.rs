use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serann::annotate::{
    annotate_corpus, apply_annotations, build_corpus_prompts, label_agreement, AnnotateOptions, AnnotationSummary,
    ContextVariant, HttpBackend, LlmBackend, MockBackend, MockPolicy, PromptContext, ResponseCache, Shots,
};
use serann::coremath::{Checkpoint, Rng, Tensor};
use serann::corpus::synth::{pattern_clip, write_synth_corpus, SynthConfig};
use serann::corpus::{
    augment_merge, write_manifest, CorpusName, Emotion, LabelSource, Provenance, UtteranceRecord,
};
use serann::dsp::{mel_spectrogram, AudioClip, FeatureRecord};
use serann::vqvae::{extract_codes, train_vqvae, CodesRecord, VqVae};

use crate::config::PipelineConfig;
use crate::experiment::{run_experiment, ExperimentSpec, SplitSpec};
use crate::report::{parse_report, summarize, AugmentEvalReport, AUGMENT_REPORT};
use crate::store::{
    open_manifest, read_annotations, read_codes, read_features, rebased, require_file, write_json, write_lines,
    write_mel, MelStore, FAILURES_FILE, FEATURES_FILE, MEL_DIR,
};

#[derive(Parser, Debug)]
#[command(name = "serann", version, about = "Speech emotion recognition with LLM annotation")]
pub struct Cli {
    /// TOML file overriding built-in defaults (flags override the file).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use the small model configs that train in seconds on one core.
    #[arg(long, global = true)]
    pub desk_scale: bool,
    /// Base seed; repeat i uses seed + i.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic corpus (WAV files plus manifest).
    Synth(SynthArgs),
    /// Mel spectrograms, energy and pitch for every manifest record.
    Features(FeaturesArgs),
    /// Train the VQ-VAE on a manifest's mel spectrograms.
    TrainVqvae(TrainVqvaeArgs),
    /// Extract 64 codes per utterance with a trained VQ-VAE.
    Encode(EncodeArgs),
    /// Label utterances with an LLM backend.
    Annotate(AnnotateArgs),
    /// Train and evaluate the classifier over folds and repeats.
    TrainClassifier(TrainClassifierArgs),
    /// Compare training with and without LLM-labelled extra data.
    AugmentEval(AugmentEvalArgs),
    /// Validate report files and print their summaries.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub speakers: usize,
    #[arg(long, default_value_t = 3)]
    pub per_class: usize,
    /// Corpus name written into the manifest.
    #[arg(long, default_value = "synthetic")]
    pub corpus: String,
    #[arg(long, default_value = "")]
    pub id_prefix: String,
    /// Write the unlabelled two-pattern VQ-VAE set instead, N clips per pattern.
    #[arg(long)]
    pub patterns: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output features directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainVqvaeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Features directories holding the manifest's mel spectrograms.
    #[arg(long, required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output codes file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    /// Utterances to label.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Gold-labelled records to draw few-shot examples from (default: --manifest).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Features directories (needed by the energy/pitch variants).
    #[arg(long)]
    pub features: Vec<PathBuf>,
    /// Codes files (needed by the codes variant).
    #[arg(long)]
    pub codes: Vec<PathBuf>,
    /// mock:oracle, mock:random:SEED, mock:fixed:LABEL, mock:keyword or http.
    #[arg(long)]
    pub backend: String,
    #[arg(long)]
    pub variant: Option<ContextVariant>,
    #[arg(long)]
    pub shots: Option<Shots>,
    /// Response cache (JSON lines); reruns only query uncached prompts.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FoldArg {
    Loso,
    Cross,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    Gold,
    Llm,
}

impl From<LabelArg> for LabelSource {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Gold => LabelSource::Gold,
            LabelArg::Llm => LabelSource::Llm,
        }
    }
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long, value_enum, default_value = "loso")]
    pub folds: FoldArg,
    /// Evaluation corpus for cross-corpus runs.
    #[arg(long)]
    pub eval_manifest: Option<PathBuf>,
    /// Test speakers of a fixed split (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub test_speakers: Vec<String>,
    /// Validation speakers of a fixed split (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub val_speakers: Vec<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Explicit per-repeat seeds (comma separated); overrides --seed/--repeats.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Skip writing per-fold checkpoints.
    #[arg(long)]
    pub no_checkpoints: bool,
}

#[derive(Args, Debug)]
pub struct TrainClassifierArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, required = true)]
    pub features: Vec<PathBuf>,
    /// Which label column trains the model; evaluation always uses gold.
    #[arg(long, value_enum, default_value = "gold")]
    pub labels: LabelArg,
    /// Annotations file whose labels are applied to the manifest first.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AugmentEvalArgs {
    /// Gold-labelled base corpus.
    #[arg(long)]
    pub manifest: PathBuf,
    /// LLM-labelled extra records (an `annotate` output manifest).
    #[arg(long)]
    pub extra: PathBuf,
    #[arg(long, required = true)]
    pub features: Vec<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

/// What a command leaves for the exit code.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    /// Records that could not be processed; outputs cover the rest.
    pub failures: usize,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), cli.desk_scale)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Synth(a) => synth(&a, &cfg),
        Command::Features(a) => features(&a),
        Command::TrainVqvae(a) => {
            if let Some(e) = a.epochs {
                cfg.vqvae.epochs = e;
            }
            cfg.validate()?;
            train_vqvae_cmd(&a, &cfg)
        }
        Command::Encode(a) => encode(&a),
        Command::Annotate(a) => {
            if let Some(v) = a.variant {
                cfg.annotate.variant = v;
            }
            if let Some(s) = a.shots {
                cfg.annotate.shots = s;
            }
            cfg.validate()?;
            annotate(&a, &cfg)
        }
        Command::TrainClassifier(a) => {
            apply_split_overrides(&mut cfg, &a.split);
            cfg.validate()?;
            train_classifier_cmd(&a, &cfg)
        }
        Command::AugmentEval(a) => {
            apply_split_overrides(&mut cfg, &a.split);
            cfg.validate()?;
            augment_eval(&a, &cfg)
        }
        Command::Report(a) => report(&a),
    }
}

fn apply_split_overrides(cfg: &mut PipelineConfig, s: &SplitArgs) {
    if let Some(r) = s.repeats {
        cfg.repeats = r;
    }
    if !s.seeds.is_empty() {
        cfg.repeats = s.seeds.len();
    }
    if let Some(e) = s.max_epochs {
        cfg.classifier.max_epochs = e;
    }
}

/// Maps `f` over `items` on all cores, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = items.len().div_ceil(workers).max(1);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(a: &SynthArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let corpus: CorpusName = serde_json::from_value(serde_json::Value::String(a.corpus.clone()))
        .map_err(|_| anyhow!("unknown corpus {:?}", a.corpus))?;
    if let Some(n) = a.patterns {
        let wav = a.out.join("wav");
        create_dir(&wav)?;
        let mut rng = Rng::new(cfg.seed);
        let mut records = Vec::new();
        for i in 0..2 * n {
            let p = i % 2;
            let id = format!("{}pattern{p}_{:03}", a.id_prefix, i / 2);
            let rec = UtteranceRecord::new(id.clone(), format!("wav/{id}.wav"), "", format!("pattern{p}"), corpus);
            pattern_clip(p, &mut rng).write_wav(&a.out.join(&rec.audio_path))?;
            records.push(rec);
        }
        write_manifest(&a.out.join("manifest.jsonl"), &records)?;
        info!("wrote {} pattern clips to {}", records.len(), a.out.display());
        return Ok(Outcome::default());
    }
    let m = write_synth_corpus(
        &a.out,
        &SynthConfig {
            speakers: a.speakers,
            per_class_per_speaker: a.per_class,
            seed: cfg.seed,
            id_prefix: a.id_prefix.clone(),
            corpus,
        },
    )?;
    info!("wrote {} utterances to {}", m.records.len(), a.out.display());
    Ok(Outcome::default())
}

#[derive(Serialize, Deserialize)]
struct RecordFailure {
    utterance_id: String,
    error: String,
}

fn features(a: &FeaturesArgs) -> Result<Outcome> {
    let manifest = open_manifest(&a.manifest)?;
    create_dir(&a.out.join(MEL_DIR))?;
    let results = par_map(&manifest.records, |r| -> Result<FeatureRecord> {
        let path = manifest.resolve_audio(r);
        let clip = AudioClip::read_wav(&path)?;
        let mel = mel_spectrogram(&clip)?;
        write_mel(&a.out, &r.utterance_id, &mel)?;
        Ok(FeatureRecord::extract(&r.utterance_id, &clip))
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in manifest.records.iter().zip(results) {
        match res {
            Ok(f) => rows.push(f),
            Err(e) => {
                warn!("{}: {e:#}", r.utterance_id);
                failures.push(RecordFailure {
                    utterance_id: r.utterance_id.clone(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    write_lines(&a.out.join(FEATURES_FILE), &rows)?;
    write_lines(&a.out.join(FAILURES_FILE), &failures)?;
    info!("features for {} of {} records", rows.len(), manifest.records.len());
    Ok(Outcome {
        failures: failures.len(),
    })
}

fn train_vqvae_cmd(a: &TrainVqvaeArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let manifest = open_manifest(&a.manifest)?;
    let store = MelStore::new(&a.features)?;
    let mels: Vec<Tensor> = manifest
        .records
        .iter()
        .map(|r| Ok(store.load(&r.utterance_id)?.into_tensor()))
        .collect::<Result<_>>()?;
    let mut rng = Rng::new(cfg.seed);
    let mut model = VqVae::new(cfg.vqvae.clone(), &mut rng)?;
    let history = train_vqvae(&mut model, &mels, &mut rng, |e| {
        info!("epoch {}: recon {:.5} codebook {:.5} commitment {:.5}", e.epoch, e.recon, e.codebook, e.commitment)
    })?;
    if let Some(bad) = history.iter().find(|e| !e.total.is_finite()) {
        bail!("non-finite VQ-VAE loss at epoch {}", bad.epoch);
    }
    create_dir(&a.out)?;
    model.to_checkpoint().save(&a.out.join("vqvae.ckpt"))?;
    write_lines(&a.out.join("vqvae_history.jsonl"), &history)?;
    write_json(&a.out.join("vqvae_config.json"), &serde_json::json!({"seed": cfg.seed, "vqvae": cfg.vqvae}))?;
    Ok(Outcome::default())
}

fn encode(a: &EncodeArgs) -> Result<Outcome> {
    let manifest = open_manifest(&a.manifest)?;
    let store = MelStore::new(&a.features)?;
    let model = VqVae::from_checkpoint(&Checkpoint::load(&a.checkpoint)?)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let results = par_map(&manifest.records, |r| -> Result<CodesRecord> {
        let mel = store.load(&r.utterance_id)?;
        Ok(extract_codes(&model, [(r.utterance_id.as_str(), &mel)])?.remove(0))
    });
    let mut rows = Vec::new();
    let mut failures = 0;
    for (r, res) in manifest.records.iter().zip(results) {
        match res {
            Ok(c) => rows.push(c),
            Err(e) => {
                warn!("{}: {e:#}", r.utterance_id);
                failures += 1;
            }
        }
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_lines(&a.out, &rows)?;
    Ok(Outcome { failures })
}

fn backend_from_spec(spec: &str, records: &[UtteranceRecord], cfg: &PipelineConfig) -> Result<Box<dyn LlmBackend>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let policy = match parts.as_slice() {
        ["http"] => return Ok(Box::new(HttpBackend::from_env(cfg.backend.clone())?)),
        ["mock", "oracle"] => MockPolicy::Oracle,
        ["mock", "keyword"] => MockPolicy::Keyword,
        ["mock", "random", seed] => MockPolicy::Random {
            seed: seed.parse().with_context(|| format!("bad seed in backend {spec:?}"))?,
        },
        ["mock", "fixed", label] => MockPolicy::Fixed {
            label: label.parse::<Emotion>().map_err(|e| anyhow!("{e}"))?,
        },
        _ => bail!("unknown backend {spec:?}"),
    };
    Ok(Box::new(MockBackend::from_policy(policy, records)?))
}

#[derive(Serialize)]
struct AnnotateReport<'a> {
    #[serde(flatten)]
    summary: &'a AnnotationSummary,
    /// Share of gold-labelled targets whose annotation matches gold.
    gold_agreement: Option<f64>,
    seed: u64,
    balanced: bool,
}

fn annotate(a: &AnnotateArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let settings = &cfg.annotate;
    let variant = settings.variant;
    let manifest = open_manifest(&a.manifest)?;
    let pool = match &a.pool {
        Some(p) => open_manifest(p)?.records,
        None => manifest.records.clone(),
    };
    if variant.uses_prosody() && a.features.is_empty() {
        bail!("variant {variant} needs --features");
    }
    if variant.uses_codes() && a.codes.is_empty() {
        bail!("variant {variant} needs --codes");
    }
    let mut feats = Vec::new();
    for d in &a.features {
        require_file(&d.join(FEATURES_FILE), "features file")?;
        feats.extend(read_features(d)?);
    }
    let mut codes = Vec::new();
    for c in &a.codes {
        require_file(c, "codes file")?;
        codes.extend(read_codes(c)?);
    }
    let ctx = PromptContext::new(feats, codes);
    let opts = AnnotateOptions {
        variant,
        shots: settings.shots,
        seed: cfg.seed,
        balanced: settings.balanced,
        failure_budget: settings.failure_budget,
        concurrency: settings.concurrency,
    };
    let backend = backend_from_spec(&a.backend, &manifest.records, cfg)?;
    let mut cache = match &a.cache {
        Some(p) => ResponseCache::open(p)?,
        None => ResponseCache::in_memory(),
    };
    create_dir(&a.out)?;
    let prompts = build_corpus_prompts(&manifest.records, &pool, &ctx, &opts)?;
    write_lines(&a.out.join("prompts.jsonl"), &prompts)?;
    let run = annotate_corpus(&manifest.records, &pool, &ctx, backend.as_ref(), &mut cache, &opts)?;

    let mut labelled = rebased(&manifest);
    apply_annotations(&mut labelled, &run.results);
    let has_gold = manifest.records.iter().any(|r| r.gold_label.is_some());
    let agreement = if has_gold {
        Some(label_agreement(&manifest.records, &run.results)?)
    } else {
        None
    };
    write_lines(&a.out.join("annotations.jsonl"), &run.results)?;
    write_manifest(&a.out.join("manifest.jsonl"), &labelled)?;
    write_json(
        &a.out.join("summary.json"),
        &AnnotateReport {
            summary: &run.summary,
            gold_agreement: agreement,
            seed: cfg.seed,
            balanced: settings.balanced,
        },
    )?;
    let s = &run.summary;
    info!(
        "annotated {}/{} with {} ({} unparseable, {} cache hits{})",
        s.annotated,
        s.total,
        s.backend_id,
        s.per_label[serann::corpus::LlmLabel::UNPARSEABLE],
        s.cache_hits,
        agreement.map_or(String::new(), |g| format!(", gold agreement {:.3}", g))
    );
    for f in &s.failures {
        warn!("{}: {}", f.utterance_id, f.error);
    }
    Ok(Outcome {
        failures: s.failures.len(),
    })
}

fn split_spec(s: &SplitArgs, cfg: &PipelineConfig) -> Result<SplitSpec> {
    Ok(match s.folds {
        FoldArg::Loso => SplitSpec::Loso,
        FoldArg::Fixed => {
            if s.test_speakers.is_empty() || s.val_speakers.is_empty() {
                bail!("fixed folds need --test-speakers and --val-speakers");
            }
            SplitSpec::Fixed {
                test_speakers: s.test_speakers.clone(),
                val_speakers: s.val_speakers.clone(),
            }
        }
        FoldArg::Cross => {
            let path = s.eval_manifest.as_ref().ok_or_else(|| anyhow!("cross folds need --eval-manifest"))?;
            SplitSpec::Cross {
                eval: open_manifest(path)?.records,
                val_fraction: cfg.val_fraction,
                seed: cfg.seed,
            }
        }
    })
}

fn experiment_spec(s: &SplitArgs, cfg: &PipelineConfig, labels: LabelSource, out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        classifier: cfg.classifier.clone(),
        labels,
        seeds: if s.seeds.is_empty() {
            cfg.repeat_seeds()
        } else {
            s.seeds.clone()
        },
        checkpoint_dir: (!s.no_checkpoints).then(|| out.join("checkpoints")),
    }
}

fn load_mels(store: &MelStore, records: &[&UtteranceRecord]) -> Result<HashMap<String, Tensor>> {
    store.load_all(records.iter().copied())
}

fn train_classifier_cmd(a: &TrainClassifierArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let manifest = open_manifest(&a.manifest)?;
    let mut records = manifest.records.clone();
    if let Some(p) = &a.annotations {
        apply_annotations(&mut records, &read_annotations(p)?);
    }
    let split = split_spec(&a.split, cfg)?;
    let store = MelStore::new(&a.features)?;
    let all: Vec<&UtteranceRecord> = records.iter().chain(split.eval_records()).collect();
    let mels = load_mels(&store, &all)?;
    create_dir(&a.out)?;
    let spec = experiment_spec(&a.split, cfg, a.labels.into(), &a.out);
    let report = run_experiment(&records, &[], &split, &mels, &spec)?;
    report.validate()?;
    write_json(&a.out.join("report.json"), &report)?;
    info!(
        "UAR {:.4} +/- {:.4} over {} repeats",
        report.overall.mean, report.overall.std, report.repeats
    );
    Ok(Outcome::default())
}

fn augment_eval(a: &AugmentEvalArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let base = open_manifest(&a.manifest)?.records;
    let extra = open_manifest(&a.extra)?.records;
    let (merged, merge) = augment_merge(&base, &extra)?;
    let extras: Vec<UtteranceRecord> = merged
        .into_iter()
        .filter(|r| r.provenance == Some(Provenance::Llm))
        .collect();
    let split = split_spec(&a.split, cfg)?;
    let store = MelStore::new(&a.features)?;
    let all: Vec<&UtteranceRecord> = base.iter().chain(&extras).chain(split.eval_records()).collect();
    let mels = load_mels(&store, &all)?;
    create_dir(&a.out)?;

    let mut spec = experiment_spec(&a.split, cfg, LabelSource::Gold, &a.out);
    let ck = spec.checkpoint_dir.take();
    spec.checkpoint_dir = ck.as_ref().map(|d| d.join("baseline"));
    let baseline = run_experiment(&base, &[], &split, &mels, &spec)?;
    spec.checkpoint_dir = ck.as_ref().map(|d| d.join("augmented"));
    let augmented = run_experiment(&base, &extras, &split, &mels, &spec)?;
    let deltas: Vec<f64> = augmented
        .overall
        .uars
        .iter()
        .zip(&baseline.overall.uars)
        .map(|(x, y)| x - y)
        .collect();
    let report = AugmentEvalReport {
        schema_version: serann::corpus::REPORT_SCHEMA_VERSION,
        report: AUGMENT_REPORT.into(),
        merge,
        mean_delta: serann::corpus::mean_and_sample_std(&deltas)?.0,
        deltas,
        baseline,
        augmented,
    };
    report.validate()?;
    write_json(&a.out.join("baseline.json"), &report.baseline)?;
    write_json(&a.out.join("augmented.json"), &report.augmented)?;
    write_json(&a.out.join("augment_report.json"), &report)?;
    info!(
        "baseline {:.4}, augmented {:.4}, delta {:+.4}",
        report.baseline.overall.mean, report.augmented.overall.mean, report.mean_delta
    );
    Ok(Outcome::default())
}

fn report(a: &ReportArgs) -> Result<Outcome> {
    let mut failures = 0;
    for f in &a.files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        match parse_report(&text) {
            Ok(r) => {
                println!("{}", f.display());
                for line in summarize(&r) {
                    println!("  {line}");
                }
            }
            Err(e) => {
                eprintln!("{}: invalid report: {e:#}", f.display());
                failures += 1;
            }
        }
    }
    Ok(Outcome { failures })
}
