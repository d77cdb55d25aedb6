use serde::Serialize;

use super::GatewayError;
use crate::corpus::{ContextEntry, SentenceRecord, VerbEntry};

/// Sentence generation system message. `{n_verbs}` is the only placeholder.
pub const GENERATION_TEMPLATE: &str = include_str!("../../templates/generation_system.txt");

/// Parsing system message, used as is.
pub const PARSING_TEMPLATE: &str = include_str!("../../templates/parsing_system.txt");

const N_VERBS: &str = "{n_verbs}";

pub const MAX_BATCH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Generation,
    Parsing,
}

/// One item embedded in a prompt: a sentence id and lemma for parsing, or
/// the 1-based list position and lemma for generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptItem {
    pub id: u64,
    pub verb: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub system_message: String,
    pub user_message: String,
    pub expected_count: usize,
    pub batch_id: String,
    pub items: Vec<PromptItem>,
}

/// Splits `items` into consecutive chunks of `max_size`, the last one
/// possibly shorter.
///
/// # Panics
///
/// If `max_size` is zero.
pub fn chunk_batches<T: Clone>(items: &[T], max_size: usize) -> Vec<Vec<T>> {
    assert!(max_size >= 1, "batch size must be at least 1");
    items.chunks(max_size).map(<[T]>::to_vec).collect()
}

pub fn build_generation_prompt(
    context: &ContextEntry,
    verbs: &[VerbEntry],
    batch_id: &str,
) -> Result<PromptBundle, GatewayError> {
    if verbs.is_empty() {
        return Err(GatewayError::NoVerbs);
    }
    let system_message = GENERATION_TEMPLATE.replace(N_VERBS, &verbs.len().to_string());
    let list = verbs
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{}. {}", i + 1, v.lemma))
        .collect::<Vec<_>>()
        .join("\n");
    let user_message = format!("{list}\n\nContext: {}\n\n", context.text);
    Ok(PromptBundle {
        kind: PromptKind::Generation,
        system_message,
        user_message,
        expected_count: verbs.len(),
        batch_id: batch_id.to_string(),
        items: verbs
            .iter()
            .enumerate()
            .map(|(i, v)| PromptItem {
                id: i as u64 + 1,
                verb: v.lemma.clone(),
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct ParseInput<'a> {
    input: Vec<ParseInputItem<'a>>,
}

#[derive(Serialize)]
struct ParseInputItem<'a> {
    id: u64,
    verb: &'a str,
    sentence: &'a str,
}

pub fn build_parsing_prompt(batch: &[SentenceRecord], batch_id: &str) -> Result<PromptBundle, GatewayError> {
    if batch.is_empty() {
        return Err(GatewayError::EmptyBatch);
    }
    if batch.len() > MAX_BATCH {
        return Err(GatewayError::BatchTooLarge(batch.len()));
    }
    let input = ParseInput {
        input: batch
            .iter()
            .map(|r| ParseInputItem {
                id: r.id,
                verb: &r.verb_lemma,
                sentence: &r.text,
            })
            .collect(),
    };
    Ok(PromptBundle {
        kind: PromptKind::Parsing,
        system_message: PARSING_TEMPLATE.to_string(),
        user_message: serde_json::to_string(&input).expect("serializing plain structs"),
        expected_count: batch.len(),
        batch_id: batch_id.to_string(),
        items: batch
            .iter()
            .map(|r| PromptItem {
                id: r.id,
                verb: r.verb_lemma.clone(),
            })
            .collect(),
    })
}
