use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::variant::ContextVariant;
use crate::corpus::{Emotion, Gender};
use crate::dsp::UtteranceFeatures;
use crate::error::{Error, Result};
use crate::vqvae::LatentCodes;

pub const TEMPLATE_VERSION: &str = "v1";
pub const FEW_SHOT_K: usize = 10;

pub const SYSTEM_PREAMBLE: &str = "You are an expert annotator of emotion in recorded speech. \
Classify the speaker's emotion into exactly one of: angry, happy, neutral, sad. \
Answer with the single word.";

/// Everything a prompt may say about one utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptInput {
    pub utterance_id: String,
    pub transcript: String,
    pub features: Option<UtteranceFeatures>,
    pub codes: Option<LatentCodes>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: PromptInput,
    pub label: Emotion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system: String,
    pub variant: ContextVariant,
    pub few_shot: Vec<FewShotExample>,
    pub target: PromptInput,
    pub template_version: String,
}

fn missing(input: &PromptInput, field: &str) -> Error {
    Error::MissingFeature {
        utterance_id: input.utterance_id.clone(),
        field: field.to_string(),
    }
}

fn check_input(input: &PromptInput, variant: ContextVariant) -> Result<()> {
    if variant.uses_prosody() && input.features.is_none() {
        return Err(missing(input, "avg_energy/avg_pitch_hz"));
    }
    if variant.uses_gender() && input.features.as_ref().is_some_and(|f| f.gender == Gender::Unknown) {
        return Err(missing(input, "gender"));
    }
    if variant.uses_codes() && input.codes.is_none() {
        return Err(missing(input, "codes"));
    }
    Ok(())
}

/// Validates the inputs against `variant` and assembles the prompt.
pub fn build_prompt(target: PromptInput, variant: ContextVariant, few_shot: Vec<FewShotExample>) -> Result<PromptSpec> {
    if !few_shot.is_empty() && few_shot.len() != FEW_SHOT_K {
        return Err(Error::InvalidConfig(format!(
            "few-shot prompts take exactly {FEW_SHOT_K} examples, got {}",
            few_shot.len()
        )));
    }
    check_input(&target, variant)?;
    for ex in &few_shot {
        check_input(&ex.input, variant)?;
        if ex.input.utterance_id == target.utterance_id {
            return Err(Error::InvalidConfig(format!(
                "utterance {} cannot be its own few-shot example",
                target.utterance_id
            )));
        }
    }
    Ok(PromptSpec {
        system: SYSTEM_PREAMBLE.to_string(),
        variant,
        few_shot,
        target,
        template_version: TEMPLATE_VERSION.to_string(),
    })
}

fn write_block(out: &mut String, input: &PromptInput, variant: ContextVariant) {
    let _ = writeln!(out, "transcript: \"{}\"", input.transcript);
    if let Some(f) = input.features.as_ref().filter(|_| variant.uses_prosody()) {
        let _ = writeln!(out, "average energy (0-1 RMS): {:.3}", f.avg_energy);
        let _ = writeln!(out, "average pitch: {:.0} Hz", f.avg_pitch_hz);
        if variant.uses_gender() {
            let _ = writeln!(out, "speaker gender: {}", f.gender);
        }
    }
    if let Some(c) = input.codes.as_ref().filter(|_| variant.uses_codes()) {
        let codes: Vec<String> = c.as_slice().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "audio codes: {}", codes.join(" "));
    }
}

impl PromptSpec {
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        if !self.few_shot.is_empty() {
            let _ = writeln!(out, "Here are {} labelled examples.\n", self.few_shot.len());
            for (i, ex) in self.few_shot.iter().enumerate() {
                let _ = writeln!(out, "Example {}:", i + 1);
                write_block(&mut out, &ex.input, self.variant);
                let _ = writeln!(out, "emotion: {}\n", ex.label);
            }
        }
        out.push_str("Utterance to classify:\n");
        write_block(&mut out, &self.target, self.variant);
        out.push_str("emotion:");
        out
    }

    /// The exact text that is hashed and sent.
    pub fn serialized(&self) -> String {
        format!(
            "template: {}\n[system]\n{}\n[user]\n{}",
            self.template_version,
            self.system,
            self.user_message()
        )
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.serialized().as_bytes()))
    }
}
