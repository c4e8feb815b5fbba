use crate::corpus::{Emotion, LlmLabel};

fn word_label(word: &str) -> Option<Emotion> {
    match word {
        "angry" | "anger" => Some(Emotion::Angry),
        "happy" | "joy" => Some(Emotion::Happy),
        "neutral" => Some(Emotion::Neutral),
        "sad" | "sadness" => Some(Emotion::Sad),
        _ => None,
    }
}

/// Reads a reply as one of the four labels. Whole words are matched case
/// insensitively, with a few synonyms folded in; a reply naming no label or
/// more than one distinct label is unparseable.
pub fn parse_label(raw: &str) -> LlmLabel {
    let lower = raw.to_lowercase();
    let mut found: Option<Emotion> = None;
    for word in lower.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        if let Some(e) = word_label(word) {
            match found {
                Some(prev) if prev != e => return LlmLabel::Unparseable,
                _ => found = Some(e),
            }
        }
    }
    found.map_or(LlmLabel::Unparseable, LlmLabel::Emotion)
}
