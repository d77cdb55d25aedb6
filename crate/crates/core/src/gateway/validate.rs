use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompts::PromptBundle;
use crate::frames::{frame_from_arguments, parse_argument_list, AnnotationError, Arguments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Missing,
    Duplicate,
    MalformedTag,
    VerbMismatch,
    Unparseable,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Missing => "missing",
            RejectReason::Duplicate => "duplicate",
            RejectReason::MalformedTag => "malformed_tag",
            RejectReason::VerbMismatch => "verb_mismatch",
            RejectReason::Unparseable => "unparseable",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseResponseItem {
    pub id: u64,
    pub verb: String,
    pub arguments: Arguments,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub id: u64,
    pub reason: RejectReason,
    pub detail: String,
}

/// Every request id lands in exactly one of the two lists, both in request
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Validation {
    pub accepted: Vec<ParseResponseItem>,
    pub rejected: Vec<Rejection>,
}

impl Validation {
    /// True when the whole response could not be read.
    pub fn is_unparseable(&self) -> bool {
        self.accepted.is_empty()
            && !self.rejected.is_empty()
            && self.rejected.iter().all(|r| r.reason == RejectReason::Unparseable)
    }
}

/// Removes a surrounding Markdown code fence, if present.
pub fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn item_list(raw: &str) -> Result<Vec<Value>, String> {
    if raw.trim().is_empty() {
        return Err("empty response".into());
    }
    let v: Value = serde_json::from_str(strip_code_fence(raw)).map_err(|e| e.to_string())?;
    match v {
        Value::Array(a) => Ok(a),
        Value::Object(mut o) => match o.remove("output") {
            Some(Value::Array(a)) => Ok(a),
            _ => Err("no `output` array".into()),
        },
        _ => Err("response is not a JSON object".into()),
    }
}

fn arguments_of(item: &Value) -> Result<Arguments, AnnotationError> {
    let list: Vec<String> = match item.get("arguments") {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or(AnnotationError::Unbracketed(x.to_string()))
            })
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(AnnotationError::Unbracketed(other.to_string())),
        None => return Err(AnnotationError::Empty),
    };
    let args = parse_argument_list(&list)?;
    if let Arguments::Args(_) = args {
        frame_from_arguments(&args)?;
    }
    Ok(args)
}

fn item_id(item: &Value) -> Option<u64> {
    match item.get("id")? {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Classifies each request id of a parsing prompt against the raw model
/// response.
pub fn validate_parse_response(request: &PromptBundle, raw: &str) -> Validation {
    let requested: BTreeMap<u64, &str> = request.items.iter().map(|i| (i.id, i.verb.as_str())).collect();
    let items = match item_list(raw) {
        Ok(items) => items,
        Err(why) => {
            return Validation {
                accepted: Vec::new(),
                rejected: request
                    .items
                    .iter()
                    .map(|i| Rejection {
                        id: i.id,
                        reason: RejectReason::Unparseable,
                        detail: why.clone(),
                    })
                    .collect(),
            }
        }
    };

    let mut outcome: BTreeMap<u64, Result<ParseResponseItem, Rejection>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for item in &items {
        let Some(id) = item_id(item) else {
            log::warn!("{}: response item without a usable id: {item}", request.batch_id);
            continue;
        };
        let Some(&want_verb) = requested.get(&id) else {
            log::warn!("{}: response names id {id}, which was not requested", request.batch_id);
            continue;
        };
        if !seen.insert(id) {
            outcome.insert(
                id,
                Err(Rejection {
                    id,
                    reason: RejectReason::Duplicate,
                    detail: "id answered more than once".into(),
                }),
            );
            continue;
        }
        let verb = item.get("verb").and_then(Value::as_str).unwrap_or("").trim();
        let result = if verb != want_verb {
            Err(Rejection {
                id,
                reason: RejectReason::VerbMismatch,
                detail: format!("expected `{want_verb}`, got `{verb}`"),
            })
        } else {
            arguments_of(item)
                .map(|arguments| ParseResponseItem {
                    id,
                    verb: verb.to_string(),
                    arguments,
                })
                .map_err(|e| Rejection {
                    id,
                    reason: RejectReason::MalformedTag,
                    detail: e.to_string(),
                })
        };
        outcome.insert(id, result);
    }

    let mut v = Validation::default();
    for item in &request.items {
        match outcome.remove(&item.id) {
            Some(Ok(a)) => v.accepted.push(a),
            Some(Err(r)) => v.rejected.push(r),
            None => v.rejected.push(Rejection {
                id: item.id,
                reason: RejectReason::Missing,
                detail: "no output entry".into(),
            }),
        }
    }
    v
}

/// One usable line of a generation response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedLine {
    /// 1-based position in the prompt's verb list.
    pub number: usize,
    pub verb: String,
    pub sentence: String,
}

/// Reads `verb<TAB>N. sentence` lines. Lines whose number and verb do not
/// match the prompt, and repeats of a number, are dropped with a warning.
pub fn parse_generation_response(request: &PromptBundle, raw: &str) -> Vec<GeneratedLine> {
    let mut out: Vec<GeneratedLine> = Vec::new();
    let mut seen = BTreeSet::new();
    for line in strip_code_fence(raw).lines() {
        let line = line.trim();
        let Some((verb, rest)) = line.split_once('\t') else {
            continue;
        };
        let verb = verb.trim();
        if verb.eq_ignore_ascii_case("verb") {
            continue;
        }
        let Some((num, sentence)) = rest.trim().split_once(". ") else {
            log::warn!("{}: unnumbered line `{line}`", request.batch_id);
            continue;
        };
        let (Ok(number), sentence) = (num.trim().parse::<usize>(), sentence.trim()) else {
            log::warn!("{}: unnumbered line `{line}`", request.batch_id);
            continue;
        };
        let expected = number.checked_sub(1).and_then(|i| request.items.get(i));
        if expected.is_none_or(|e| e.verb != verb) || sentence.is_empty() {
            log::warn!("{}: line `{line}` does not match the verb list", request.batch_id);
            continue;
        }
        if !seen.insert(number) {
            log::warn!("{}: verb number {number} answered twice", request.batch_id);
            continue;
        }
        out.push(GeneratedLine {
            number,
            verb: verb.to_string(),
            sentence: sentence.to_string(),
        });
    }
    out.sort_by_key(|l| l.number);
    out
}
