use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{ChatRequest, LlmBackend};
use super::cache::{CacheEntry, ResponseCache};
use super::error::BackendError;
use super::parse::parse_label;
use super::prompt::{build_prompt, FewShotExample, PromptInput, PromptSpec, FEW_SHOT_K, TEMPLATE_VERSION};
use super::variant::{ContextVariant, Shots};
use crate::coremath::Rng;
use crate::corpus::{Emotion, LlmLabel, UtteranceRecord, REPORT_SCHEMA_VERSION};
use crate::dsp::FeatureRecord;
use crate::error::{Error, Result};
use crate::vqvae::{CodesRecord, LatentCodes};

/// One line of an annotations file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub utterance_id: String,
    pub label: LlmLabel,
    pub raw_response: String,
    pub prompt_hash: String,
    pub backend_id: String,
    pub template_version: String,
}

/// Per-utterance features and codes available to prompts.
#[derive(Clone, Debug, Default)]
pub struct PromptContext {
    pub features: HashMap<String, FeatureRecord>,
    pub codes: HashMap<String, LatentCodes>,
}

impl PromptContext {
    pub fn new(features: Vec<FeatureRecord>, codes: Vec<CodesRecord>) -> Self {
        PromptContext {
            features: features.into_iter().map(|f| (f.utterance_id.clone(), f)).collect(),
            codes: codes.into_iter().map(|c| (c.utterance_id, c.codes)).collect(),
        }
    }

    /// The prompt payload for `record`, carrying what `variant` needs.
    pub fn input(&self, record: &UtteranceRecord, variant: ContextVariant) -> Result<PromptInput> {
        let id = &record.utterance_id;
        let missing = |field: &str| Error::MissingFeature {
            utterance_id: id.clone(),
            field: field.to_string(),
        };
        let features = if variant.uses_prosody() {
            let f = self.features.get(id).ok_or_else(|| missing("avg_energy/avg_pitch_hz"))?;
            Some(f.with_gender(record.gender))
        } else {
            None
        };
        let codes = if variant.uses_codes() {
            Some(self.codes.get(id).ok_or_else(|| missing("codes"))?.clone())
        } else {
            None
        };
        Ok(PromptInput {
            utterance_id: id.clone(),
            transcript: record.transcript.clone(),
            features,
            codes,
        })
    }
}

/// `k` gold-labelled records drawn without replacement. The draw is a
/// prefix of any larger draw with the same seed. `balanced` cycles through
/// the classes instead of sampling uniformly.
pub fn select_few_shot<'a>(
    pool: &'a [UtteranceRecord],
    k: usize,
    balanced: bool,
    rng: &mut Rng,
) -> Result<Vec<&'a UtteranceRecord>> {
    if pool.len() < k {
        return Err(Error::TooFew {
            needed: k,
            available: pool.len(),
        });
    }
    if let Some(r) = pool.iter().find(|r| r.gold_label.is_none()) {
        return Err(Error::MissingFeature {
            utterance_id: r.utterance_id.clone(),
            field: "gold_label".into(),
        });
    }
    let mut sorted: Vec<&UtteranceRecord> = pool.iter().collect();
    sorted.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    if !balanced {
        rng.partial_shuffle(&mut sorted, k);
        sorted.truncate(k);
        return Ok(sorted);
    }
    let mut by_class: Vec<Vec<&UtteranceRecord>> = Emotion::ALL
        .iter()
        .map(|e| sorted.iter().copied().filter(|r| r.gold_label == Some(*e)).collect())
        .collect();
    for class in &mut by_class {
        rng.shuffle(class);
        class.reverse();
    }
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        for class in &mut by_class {
            if out.len() < k {
                if let Some(r) = class.pop() {
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotateOptions {
    pub variant: ContextVariant,
    pub shots: Shots,
    pub seed: u64,
    pub balanced: bool,
    /// Per-utterance backend failures tolerated before the run aborts.
    pub failure_budget: usize,
    /// Concurrent backend requests.
    pub concurrency: usize,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        AnnotateOptions {
            variant: ContextVariant::TextOnly,
            shots: Shots::Zero,
            seed: 0,
            balanced: false,
            failure_budget: 0,
            concurrency: 1,
        }
    }
}

/// Prompts for every target, in target order. Few-shot prompts share one
/// seeded draw of exemplars; a target that was drawn is replaced by the
/// next record of the draw, so no prompt shows its own target's label.
pub fn build_corpus_prompts(
    targets: &[UtteranceRecord],
    pool: &[UtteranceRecord],
    ctx: &PromptContext,
    opts: &AnnotateOptions,
) -> Result<Vec<PromptSpec>> {
    let draw = match opts.shots {
        Shots::Zero => Vec::new(),
        Shots::Few => {
            let k = (FEW_SHOT_K + 1).min(pool.len()).max(FEW_SHOT_K);
            select_few_shot(pool, k, opts.balanced, &mut Rng::new(opts.seed))?
        }
    };
    let examples: Vec<FewShotExample> = draw
        .iter()
        .map(|r| {
            Ok(FewShotExample {
                input: ctx.input(r, opts.variant)?,
                label: r.gold_label.expect("pool checked for gold labels"),
            })
        })
        .collect::<Result<_>>()?;
    targets
        .iter()
        .map(|t| {
            let few: Vec<FewShotExample> = examples
                .iter()
                .filter(|e| e.input.utterance_id != t.utterance_id)
                .take(FEW_SHOT_K)
                .cloned()
                .collect();
            if opts.shots == Shots::Few && few.len() < FEW_SHOT_K {
                return Err(Error::TooFew {
                    needed: FEW_SHOT_K + 1,
                    available: pool.len(),
                });
            }
            build_prompt(ctx.input(t, opts.variant)?, opts.variant, few)
        })
        .collect()
}

/// Answers one prompt from the cache, or asks the backend and records the reply.
pub fn annotate_one(
    prompt: &PromptSpec,
    backend: &dyn LlmBackend,
    cache: &Mutex<ResponseCache>,
) -> Result<(AnnotationResult, bool)> {
    let hash = prompt.hash();
    let backend_id = backend.id();
    let id = &prompt.target.utterance_id;
    let cached = cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&backend_id, &hash)
        .map(str::to_string);
    let hit = cached.is_some();
    let raw = match cached {
        Some(raw) => raw,
        None => {
            let raw = backend.complete(&ChatRequest::from_prompt(prompt)).map_err(|source| Error::Backend {
                utterance_id: id.clone(),
                source,
            })?;
            cache.lock().unwrap_or_else(|e| e.into_inner()).insert(CacheEntry {
                prompt_hash: hash.clone(),
                backend_id: backend_id.clone(),
                raw_response: raw.clone(),
            })?;
            raw
        }
    };
    Ok((
        AnnotationResult {
            utterance_id: id.clone(),
            label: parse_label(&raw),
            raw_response: raw,
            prompt_hash: hash,
            backend_id,
            template_version: prompt.template_version.clone(),
        },
        hit,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub utterance_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub schema_version: u32,
    pub backend_id: String,
    pub variant: ContextVariant,
    pub shots: Shots,
    pub template_version: String,
    pub total: usize,
    pub annotated: usize,
    /// Counts per label, `unparseable` included.
    pub per_label: BTreeMap<String, usize>,
    pub unparseable_rate: f64,
    pub cache_hits: usize,
    pub cache_hit_rate: f64,
    pub failures: Vec<AnnotationFailure>,
}

pub struct AnnotationRun {
    /// Sorted by utterance id.
    pub results: Vec<AnnotationResult>,
    pub summary: AnnotationSummary,
}

/// Annotates every target. Per-utterance backend failures are recorded and
/// skipped until they exceed the failure budget; an authentication failure
/// ends the run at once.
pub fn annotate_corpus(
    targets: &[UtteranceRecord],
    pool: &[UtteranceRecord],
    ctx: &PromptContext,
    backend: &dyn LlmBackend,
    cache: &mut ResponseCache,
    opts: &AnnotateOptions,
) -> Result<AnnotationRun> {
    let prompts = build_corpus_prompts(targets, pool, ctx, opts)?;
    let shared = Mutex::new(std::mem::take(cache));
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<std::result::Result<(AnnotationResult, bool), Error>>>> =
        Mutex::new((0..prompts.len()).map(|_| None).collect());
    let failures = AtomicUsize::new(0);

    std::thread::scope(|s| {
        for _ in 0..opts.concurrency.max(1) {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(prompt) = prompts.get(i) else { break };
                let out = annotate_one(prompt, backend, &shared);
                if let Err(e) = &out {
                    let auth = matches!(e, Error::Backend { source: BackendError::Auth { .. }, .. });
                    let n = failures.fetch_add(1, Ordering::SeqCst) + 1;
                    if auth || n > opts.failure_budget || !matches!(e, Error::Backend { .. }) {
                        stop.store(true, Ordering::SeqCst);
                    }
                }
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
            });
        }
    });
    *cache = shared.into_inner().unwrap_or_else(|e| e.into_inner());

    let mut results = Vec::new();
    let mut failed = Vec::new();
    let mut hits = 0;
    for slot in slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten() {
        match slot {
            Ok((r, hit)) => {
                hits += hit as usize;
                results.push(r);
            }
            Err(Error::Backend {
                utterance_id,
                source: BackendError::Auth { status },
            }) => {
                return Err(Error::Backend {
                    utterance_id,
                    source: BackendError::Auth { status },
                })
            }
            Err(e @ Error::Backend { .. }) => failed.push(e),
            Err(e) => return Err(e),
        }
    }
    if failed.len() > opts.failure_budget {
        return Err(Error::FailureBudget {
            failures: failed.len(),
            budget: opts.failure_budget,
        });
    }
    results.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let mut per_label: BTreeMap<String, usize> = Emotion::ALL.iter().map(|e| (e.to_string(), 0)).collect();
    per_label.insert(LlmLabel::UNPARSEABLE.to_string(), 0);
    for r in &results {
        *per_label.entry(r.label.to_string()).or_default() += 1;
    }
    let n = results.len();
    let rate = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
    let summary = AnnotationSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        backend_id: backend.id(),
        variant: opts.variant,
        shots: opts.shots,
        template_version: TEMPLATE_VERSION.to_string(),
        total: targets.len(),
        annotated: n,
        unparseable_rate: rate(per_label[LlmLabel::UNPARSEABLE]),
        per_label,
        cache_hits: hits,
        cache_hit_rate: rate(hits),
        failures: failed
            .into_iter()
            .map(|e| match e {
                Error::Backend { utterance_id, source } => AnnotationFailure {
                    utterance_id,
                    error: source.to_string(),
                },
                other => AnnotationFailure {
                    utterance_id: String::new(),
                    error: other.to_string(),
                },
            })
            .collect(),
    };
    Ok(AnnotationRun { results, summary })
}

/// Copies each result's label onto the matching record.
pub fn apply_annotations(records: &mut [UtteranceRecord], results: &[AnnotationResult]) {
    let by_id: HashMap<&str, LlmLabel> = results.iter().map(|r| (r.utterance_id.as_str(), r.label)).collect();
    for r in records {
        if let Some(l) = by_id.get(r.utterance_id.as_str()) {
            r.llm_label = Some(*l);
        }
    }
}

/// Fraction of gold-labelled records whose annotation equals the gold label;
/// unparseable and missing annotations count as disagreement.
pub fn label_agreement(records: &[UtteranceRecord], results: &[AnnotationResult]) -> Result<f64> {
    let by_id: HashMap<&str, LlmLabel> = results.iter().map(|r| (r.utterance_id.as_str(), r.label)).collect();
    let gold: Vec<_> = records.iter().filter_map(|r| r.gold_label.map(|g| (r, g))).collect();
    if gold.is_empty() {
        return Err(Error::Empty("no gold-labelled records to compare".into()));
    }
    let agree = gold
        .iter()
        .filter(|(r, g)| by_id.get(r.utterance_id.as_str()) == Some(&LlmLabel::Emotion(*g)))
        .count();
    Ok(agree as f64 / gold.len() as f64)
}
