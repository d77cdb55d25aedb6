use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::backend::{Backend, BackendError, ChatRequest, Sampling, TranscriptEntry};
use super::prompts::{build_generation_prompt, build_parsing_prompt, chunk_batches, MAX_BATCH};
use super::validate::{parse_generation_response, validate_parse_response, RejectReason, Rejection};
use super::GatewayError;
use crate::corpus::{ContextEntry, SentenceRecord, VerbEntry};
use crate::frames::ArgumentAnnotation;

#[derive(Debug, Clone, PartialEq)]
pub struct DriverOptions {
    pub model_generate: String,
    pub model_parse: String,
    pub sampling: Sampling,
    pub max_batch: usize,
    /// Extra attempts after the first one.
    pub retries: usize,
    pub concurrency: usize,
}

impl Default for DriverOptions {
    fn default() -> Self {
        DriverOptions {
            model_generate: "gpt-4o-mini".into(),
            model_parse: "gpt-4o-2024-05-13".into(),
            sampling: Sampling::default(),
            max_batch: MAX_BATCH,
            retries: 3,
            concurrency: 4,
        }
    }
}

/// One request/response pair as sent, in batch then attempt order.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub batch_id: String,
    pub attempt: usize,
    pub request: ChatRequest,
    /// `None` when the backend call itself failed.
    pub response: Option<String>,
}

impl Exchange {
    pub fn to_transcript(exchanges: &[Exchange]) -> Vec<TranscriptEntry> {
        let mut seen = BTreeSet::new();
        exchanges
            .iter()
            .filter_map(|e| {
                let response = e.response.clone()?;
                let digest = super::backend::digest(&e.request);
                seen.insert(digest.clone()).then(|| TranscriptEntry {
                    digest,
                    request: Some(e.request.clone()),
                    response,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsingOutcome {
    /// Accepted annotations sorted by sentence id.
    pub annotations: Vec<ArgumentAnnotation>,
    /// Ids still unanswered after all retries, with the last reason.
    pub missing: Vec<Rejection>,
    pub exchanges: Vec<Exchange>,
}

/// Runs `jobs` on up to `workers` threads; results come back in job order.
fn run_pool<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

struct BatchResult {
    accepted: Vec<ArgumentAnnotation>,
    missing: Vec<Rejection>,
    exchanges: Vec<Exchange>,
}

fn parse_batch(
    batch_id: &str,
    batch: &[SentenceRecord],
    backend: &dyn Backend,
    opts: &DriverOptions,
    source: &str,
) -> Result<BatchResult, GatewayError> {
    let mut pending = batch.to_vec();
    let mut out = BatchResult {
        accepted: Vec::new(),
        missing: Vec::new(),
        exchanges: Vec::new(),
    };
    let mut last_rejections: Vec<Rejection> = Vec::new();
    let mut last_error: Option<BackendError> = None;
    let attempts = 1 + opts.retries;
    for attempt in 0..attempts {
        if pending.is_empty() {
            break;
        }
        let prompt = build_parsing_prompt(&pending, batch_id)?;
        let request = ChatRequest {
            model: opts.model_parse.clone(),
            system: prompt.system_message.clone(),
            user: prompt.user_message.clone(),
            sampling: opts.sampling,
        };
        match backend.complete(&request) {
            Err(e) if e.is_transient() => {
                log::warn!("{batch_id}: attempt {} failed: {e}", attempt + 1);
                out.exchanges.push(Exchange {
                    batch_id: batch_id.to_string(),
                    attempt,
                    request,
                    response: None,
                });
                last_error = Some(e);
            }
            Err(e) => {
                return Err(GatewayError::Backend {
                    batch_id: batch_id.to_string(),
                    attempts: attempt + 1,
                    source: e,
                })
            }
            Ok(raw) => {
                let v = validate_parse_response(&prompt, &raw);
                out.exchanges.push(Exchange {
                    batch_id: batch_id.to_string(),
                    attempt,
                    request,
                    response: Some(raw),
                });
                last_error = None;
                if v.is_unparseable() {
                    log::warn!("{batch_id}: unparseable response ({})", v.rejected[0].detail);
                } else if !v.rejected.is_empty() {
                    log::info!("{batch_id}: {} items rejected, resubmitting", v.rejected.len());
                }
                out.accepted.extend(v.accepted.into_iter().map(|a| ArgumentAnnotation {
                    sentence_id: a.id,
                    source: source.to_string(),
                    arguments: a.arguments,
                }));
                let redo: BTreeSet<u64> = v.rejected.iter().map(|r| r.id).collect();
                pending.retain(|r| redo.contains(&r.id));
                last_rejections = v.rejected;
            }
        }
    }
    if !pending.is_empty() {
        if let Some(e) = last_error {
            if last_rejections.is_empty() {
                return Err(GatewayError::Backend {
                    batch_id: batch_id.to_string(),
                    attempts,
                    source: e,
                });
            }
        }
        out.missing = last_rejections;
        if out.missing.len() != pending.len() {
            // the final attempt was a transport failure after an earlier partial answer
            let known: BTreeSet<u64> = out.missing.iter().map(|r| r.id).collect();
            out.missing
                .extend(pending.iter().filter(|r| !known.contains(&r.id)).map(|r| Rejection {
                    id: r.id,
                    reason: RejectReason::Missing,
                    detail: "backend failure on last attempt".into(),
                }));
        }
        out.missing.retain(|r| pending.iter().any(|p| p.id == r.id));
    }
    Ok(out)
}

/// Annotates `records` in batches of at most `opts.max_batch`, keeping
/// several batches in flight. The outcome does not depend on completion
/// order.
pub fn run_parsing(
    records: &[SentenceRecord],
    backend: &dyn Backend,
    opts: &DriverOptions,
    source: &str,
) -> Result<ParsingOutcome, GatewayError> {
    let size = opts.max_batch.clamp(1, MAX_BATCH);
    let jobs: Vec<(String, Vec<SentenceRecord>)> = chunk_batches(records, size)
        .into_iter()
        .enumerate()
        .map(|(i, b)| (format!("parse-{:05}", i + 1), b))
        .collect();
    let results = run_pool(&jobs, opts.concurrency, |(id, batch)| {
        parse_batch(id, batch, backend, opts, source)
    });
    let mut outcome = ParsingOutcome::default();
    for r in results {
        let r = r?;
        outcome.annotations.extend(r.accepted);
        outcome.missing.extend(r.missing);
        outcome.exchanges.extend(r.exchanges);
    }
    outcome.annotations.sort_by_key(|a| a.sentence_id);
    outcome.missing.sort_by_key(|m| m.id);
    Ok(outcome)
}

#[derive(Debug, Clone, Default)]
pub struct GenerationOutcome {
    pub sentences: Vec<SentenceRecord>,
    /// (batch id, lemma) pairs the model did not answer.
    pub omitted: Vec<(String, String)>,
    pub exchanges: Vec<Exchange>,
}

/// One prompt per context over the whole verb list. Sentence ids are
/// `context position * |verbs| + verb position`, 1-based, so they do not
/// shift when the model skips a verb.
pub fn run_generation(
    contexts: &[ContextEntry],
    verbs: &[VerbEntry],
    backend: &dyn Backend,
    opts: &DriverOptions,
) -> Result<GenerationOutcome, GatewayError> {
    let jobs: Vec<(usize, &ContextEntry)> = contexts.iter().enumerate().collect();
    let results = run_pool(&jobs, opts.concurrency, |&(pos, ctx)| {
        let batch_id = format!("gen-{:05}", ctx.number);
        let prompt = build_generation_prompt(ctx, verbs, &batch_id)?;
        let request = ChatRequest {
            model: opts.model_generate.clone(),
            system: prompt.system_message.clone(),
            user: prompt.user_message.clone(),
            sampling: opts.sampling,
        };
        let mut exchanges = Vec::new();
        let mut lines = Vec::new();
        for attempt in 0..=opts.retries {
            match backend.complete(&request) {
                Ok(raw) => {
                    lines = parse_generation_response(&prompt, &raw);
                    exchanges.push(Exchange {
                        batch_id: batch_id.clone(),
                        attempt,
                        request: request.clone(),
                        response: Some(raw),
                    });
                    if !lines.is_empty() {
                        break;
                    }
                }
                Err(e) if e.is_transient() && attempt < opts.retries => {
                    log::warn!("{batch_id}: attempt {} failed: {e}", attempt + 1);
                    exchanges.push(Exchange {
                        batch_id: batch_id.clone(),
                        attempt,
                        request: request.clone(),
                        response: None,
                    });
                }
                Err(e) => {
                    return Err(GatewayError::Backend {
                        batch_id,
                        attempts: attempt + 1,
                        source: e,
                    })
                }
            }
        }
        let answered: BTreeSet<usize> = lines.iter().map(|l| l.number).collect();
        let omitted: Vec<(String, String)> = verbs
            .iter()
            .enumerate()
            .filter(|(i, _)| !answered.contains(&(i + 1)))
            .map(|(_, v)| (batch_id.clone(), v.lemma.clone()))
            .collect();
        let sentences: Vec<SentenceRecord> = lines
            .into_iter()
            .map(|l| SentenceRecord {
                id: (pos * verbs.len() + l.number) as u64,
                verb_lemma: l.verb,
                context_number: Some(ctx.number),
                text: l.sentence,
                batch_id: batch_id.clone(),
            })
            .collect();
        Ok((sentences, omitted, exchanges))
    });
    let mut outcome = GenerationOutcome::default();
    for r in results {
        let (s, o, e) = r?;
        outcome.sentences.extend(s);
        outcome.omitted.extend(o);
        outcome.exchanges.extend(e);
    }
    outcome.sentences.sort_by_key(|s| s.id);
    Ok(outcome)
}
