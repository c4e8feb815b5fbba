use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::error::BackendError;
use super::prompt::PromptSpec;
use crate::corpus::{Emotion, UtteranceRecord};
use crate::error::{Error, Result};

/// One chat-completion request. `utterance_id` never goes over the wire;
/// mocks use it to look up their answer.
#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    pub utterance_id: String,
    pub system: String,
    pub user: String,
}

impl ChatRequest {
    pub fn from_prompt(prompt: &PromptSpec) -> Self {
        ChatRequest {
            utterance_id: prompt.target.utterance_id.clone(),
            system: prompt.system.clone(),
            user: prompt.user_message(),
        }
    }
}

pub trait LlmBackend: Send + Sync {
    /// Stable identifier, recorded with every annotation and cache entry.
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

/// Offline answering policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum MockPolicy {
    /// Answers each utterance's gold label.
    Oracle,
    /// Uniform over the four labels, a pure function of seed and utterance id.
    Random { seed: u64 },
    Fixed { label: Emotion },
    /// Looks for emotion keywords in the target transcript; neutral otherwise.
    Keyword,
}

pub struct MockBackend {
    policy: MockPolicy,
    gold: HashMap<String, Emotion>,
}

const KEYWORDS: [(&str, Emotion); 12] = [
    ("furious", Emotion::Angry),
    ("hate", Emotion::Angry),
    ("outrageous", Emotion::Angry),
    ("enough", Emotion::Angry),
    ("wonderful", Emotion::Happy),
    ("great", Emotion::Happy),
    ("love", Emotion::Happy),
    ("fantastic", Emotion::Happy),
    ("miss", Emotion::Sad),
    ("hopeless", Emotion::Sad),
    ("sorry", Emotion::Sad),
    ("cried", Emotion::Sad),
];

/// Label drawn from a hash of `(seed, id)`, so it does not depend on the
/// order in which utterances are annotated.
pub fn random_label(seed: u64, utterance_id: &str) -> Emotion {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(utterance_id.as_bytes());
    let d = h.finalize();
    let v = u64::from_le_bytes(d[..8].try_into().unwrap());
    Emotion::ALL[(v % Emotion::COUNT as u64) as usize]
}

fn target_transcript(user: &str) -> &str {
    let block = user.rsplit("Utterance to classify:").next().unwrap_or(user);
    block
        .lines()
        .find_map(|l| l.strip_prefix("transcript: "))
        .unwrap_or("")
}

impl MockBackend {
    pub fn new(policy: MockPolicy) -> Self {
        MockBackend {
            policy,
            gold: HashMap::new(),
        }
    }

    /// An oracle over `records`; every record needs a gold label.
    pub fn oracle(records: &[UtteranceRecord]) -> Result<Self> {
        let mut gold = HashMap::with_capacity(records.len());
        for r in records {
            let label = r.gold_label.ok_or_else(|| Error::MissingFeature {
                utterance_id: r.utterance_id.clone(),
                field: "gold_label".into(),
            })?;
            gold.insert(r.utterance_id.clone(), label);
        }
        Ok(MockBackend {
            policy: MockPolicy::Oracle,
            gold,
        })
    }

    /// Builds the policy, loading gold labels from `records` when it is the oracle.
    pub fn from_policy(policy: MockPolicy, records: &[UtteranceRecord]) -> Result<Self> {
        match policy {
            MockPolicy::Oracle => Self::oracle(records),
            p => Ok(Self::new(p)),
        }
    }

    pub fn policy(&self) -> &MockPolicy {
        &self.policy
    }
}

impl LlmBackend for MockBackend {
    fn id(&self) -> String {
        match &self.policy {
            MockPolicy::Oracle => "mock:oracle".into(),
            MockPolicy::Random { seed } => format!("mock:random:{seed}"),
            MockPolicy::Fixed { label } => format!("mock:fixed:{label}"),
            MockPolicy::Keyword => "mock:keyword".into(),
        }
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let label = match &self.policy {
            MockPolicy::Oracle => *self.gold.get(&request.utterance_id).ok_or_else(|| {
                BackendError::Fatal(format!("oracle has no gold label for {}", request.utterance_id))
            })?,
            MockPolicy::Random { seed } => random_label(*seed, &request.utterance_id),
            MockPolicy::Fixed { label } => *label,
            MockPolicy::Keyword => {
                let text = target_transcript(&request.user).to_lowercase();
                KEYWORDS
                    .iter()
                    .find(|(k, _)| text.contains(k))
                    .map_or(Emotion::Neutral, |(_, e)| *e)
            }
        };
        Ok(label.to_string())
    }
}
