//! LLM annotation: prompts built from transcripts and optional audio
//! context, pluggable backends, a response cache and label parsing.

mod backend;
mod cache;
mod error;
mod http;
mod parse;
mod prompt;
mod run;
mod variant;

pub use backend::{random_label, ChatRequest, LlmBackend, MockBackend, MockPolicy};
pub use cache::{CacheEntry, ResponseCache};
pub use error::BackendError;
pub use http::{with_retry, BackendConfig, HttpBackend};
pub use parse::parse_label;
pub use prompt::{build_prompt, FewShotExample, PromptInput, PromptSpec, FEW_SHOT_K, SYSTEM_PREAMBLE, TEMPLATE_VERSION};
pub use run::{
    annotate_corpus, annotate_one, apply_annotations, build_corpus_prompts, label_agreement, select_few_shot,
    AnnotateOptions, AnnotationFailure, AnnotationResult, AnnotationRun, AnnotationSummary, PromptContext,
};
pub use variant::{ContextVariant, Shots};
