//! Offline stand-in for the model endpoint.
//!
//! Generation fills a small set of sentence templates from a seeded RNG;
//! parsing runs a shallow word-class chunker over the clause that contains
//! the verb. Output depends only on the request and the seed.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::backend::{Backend, BackendError, ChatRequest};
use super::prompts::PARSING_TEMPLATE;
use crate::corpus::{SentenceRecord, VerbEntry};
use crate::text;

pub struct MockBackend {
    verbs: HashMap<String, VerbEntry>,
    seed: u64,
}

const SUBJECTS: [&str; 7] = ["She", "He", "We", "They", "I", "My neighbor", "The coach"];
const OBJECTS: [&str; 8] = [
    "the letter",
    "a few boxes",
    "the old truck",
    "her sister",
    "the answer",
    "some extra time",
    "the money",
    "a book",
];
const RECIPIENTS: [&str; 5] = ["the kids", "the manager", "everyone", "the new tenant", "our team"];
const CLAUSES: [&str; 5] = [
    "the plan would work",
    "nobody had noticed",
    "the storm was coming",
    "we were late",
    "it made sense",
];
const OTHER_PREPS: [&str; 6] = ["to", "with", "for", "on", "about", "into"];

const DETERMINERS: [&str; 11] = [
    "the", "a", "an", "his", "her", "my", "their", "our", "your", "this", "its",
];
const OBJECT_PRONOUNS: [&str; 6] = ["me", "him", "her", "us", "them", "you"];
const PARTICLES: [&str; 6] = ["up", "down", "out", "off", "away", "back"];
const COMPLEMENTIZERS: [&str; 3] = ["that", "if", "whether"];
const PREPOSITIONS: [&str; 16] = [
    "to", "for", "with", "on", "onto", "into", "in", "at", "about", "over", "from", "by", "of", "under", "through",
    "across",
];
const TIME_WORDS: [&str; 10] = [
    "yesterday",
    "today",
    "tomorrow",
    "tonight",
    "now",
    "again",
    "soon",
    "later",
    "here",
    "there",
];

impl MockBackend {
    pub fn new(verbs: impl IntoIterator<Item = VerbEntry>, seed: u64) -> Self {
        MockBackend {
            verbs: verbs.into_iter().map(|v| (v.lemma.clone(), v)).collect(),
            seed,
        }
    }

    fn rng_for(&self, req: &ChatRequest) -> ChaCha8Rng {
        let h = Sha256::digest(req.user.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&h[..8]);
        ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_le_bytes(b))
    }

    fn generate(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let mut rng = self.rng_for(req);
        let (list, context) = req
            .user
            .split_once("\n\nContext: ")
            .ok_or_else(|| BackendError::Payload("generation request without a context".into()))?;
        let context = context.trim().trim_end_matches(|c: char| c.is_ascii_punctuation());
        let mut lines = Vec::new();
        for item in list.lines() {
            let Some((num, lemma)) = item.split_once(". ") else {
                continue;
            };
            let Some(verb) = self.verbs.get(lemma.trim()) else {
                continue;
            };
            lines.push(format!(
                "{}\t{}. {}",
                verb.lemma,
                num,
                sentence_for(verb, context, &mut rng)
            ));
        }
        Ok(lines.join("\n"))
    }

    fn parse(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let input: Value = serde_json::from_str(&req.user).map_err(|e| BackendError::Payload(e.to_string()))?;
        let items = input["input"]
            .as_array()
            .ok_or_else(|| BackendError::Payload("parsing request without an input array".into()))?;
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let id = item["id"].as_u64().unwrap_or_default();
            let lemma = item["verb"].as_str().unwrap_or_default();
            let sentence = item["sentence"].as_str().unwrap_or_default();
            let fallback;
            let verb = match self.verbs.get(lemma) {
                Some(v) => v,
                None => {
                    fallback = VerbEntry {
                        lemma: lemma.to_string(),
                        forms: vec![lemma.to_string()],
                        alternation_class: crate::corpus::AlternationClass::None,
                        locative_preps: Vec::new(),
                    };
                    &fallback
                }
            };
            out.push(json!({ "id": id, "verb": lemma, "arguments": annotate(sentence, verb) }));
        }
        Ok(json!({ "output": out }).to_string())
    }
}

impl Backend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        if req.system == PARSING_TEMPLATE {
            self.parse(req)
        } else if req.system.starts_with("You are a random sentence generator") {
            self.generate(req)
        } else {
            Err(BackendError::Config(
                "mock backend does not recognize the system message".into(),
            ))
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentence_for<R: Rng>(verb: &VerbEntry, context: &str, rng: &mut R) -> String {
    let f = &verb.forms;
    let (base, past, participle, gerund) = (&f[0], &f[2], &f[3], &f[4]);
    let subj = pick(rng, &SUBJECTS);
    let obj = pick(rng, &OBJECTS);
    let to_whom = pick(rng, &RECIPIENTS);
    let prep = if verb.alternation_class.is_dative() {
        pick(rng, &["to", "for", "with"]).to_string()
    } else if !verb.locative_preps.is_empty() {
        verb.locative_preps[rng.random_range(0..verb.locative_preps.len())].clone()
    } else {
        pick(rng, &OTHER_PREPS).to_string()
    };
    match rng.random_range(0..12) {
        0 => format!("{subj} {past} {obj}."),
        1 => format!("{subj} {past} {obj} {prep} {to_whom}."),
        2 => format!("{subj} {past} that {}.", pick(rng, &CLAUSES)),
        3 => format!("{subj} {past} yesterday."),
        4 => format!("{subj} {past} {} {obj}.", pick(rng, &["me", "them", "us"])),
        5 => format!("{}, {} {past} {obj}.", capitalize(context), subj.to_lowercase()),
        6 => format!("{subj} will {base} {prep} {to_whom} soon."),
        7 => format!("{subj} {past} up."),
        8 => format!("{} was {participle} by {to_whom}.", capitalize(obj)),
        9 => format!("The {base} was all anyone could talk about."),
        10 => format!("{subj} kept {gerund} {obj}."),
        _ => format!("{subj} {past} {obj} quickly."),
    }
}

fn in_list(w: &str, list: &[&str]) -> bool {
    list.contains(&w)
}

/// Chunks the post-verbal words of the verb's clause into tagged
/// arguments. Returns `["NA"]`, `["[intransitive]"]` or a list of
/// `[span]_TAG` strings whose spans are copied from the sentence.
pub(crate) fn annotate(sentence: &str, verb: &VerbEntry) -> Vec<String> {
    let record = SentenceRecord {
        id: 0,
        verb_lemma: verb.lemma.clone(),
        context_number: None,
        text: sentence.to_string(),
        batch_id: String::new(),
    };
    let Some(clause) = crate::cleaning::clause_containing_verb(&record, verb) else {
        return vec!["NA".into()];
    };
    let tokens: Vec<&str> = clause.split_whitespace().collect();
    let words: Vec<String> = tokens.iter().map(|t| text::word(t)).collect();
    let Some(v) = words.iter().position(|w| verb.has_form(w)) else {
        return vec!["NA".into()];
    };
    if v > 0 && in_list(&words[v - 1], &DETERMINERS) && words[v - 1] != "her" {
        return vec!["NA".into()];
    }

    let mut toks: Vec<String> = tokens[v + 1..].iter().map(|t| t.to_string()).collect();
    let mut ws: Vec<String> = words[v + 1..].to_vec();
    if let Some(last) = toks.last_mut() {
        *last = last
            .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '\'')
            .to_string();
    }
    let is_adjunct = |w: &str| in_list(w, &TIME_WORDS) || (w.len() > 4 && w.ends_with("ly"));
    while ws.last().is_some_and(|w| w.is_empty() || is_adjunct(w)) {
        ws.pop();
        toks.pop();
    }
    while ws.first().is_some_and(|w| is_adjunct(w)) {
        ws.remove(0);
        toks.remove(0);
    }
    if ws.is_empty() {
        return vec!["[intransitive]".into()];
    }

    let n = ws.len();
    let span = |a: usize, b: usize| toks[a..b].join(" ");
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let w = ws[i].as_str();
        if i == 0 && in_list(w, &PARTICLES) {
            out.push(format!("[{}]_PRT", span(i, i + 1)));
            i += 1;
        } else if in_list(w, &COMPLEMENTIZERS) {
            out.push(format!("[{}]_SBAR", span(i, n)));
            i = n;
        } else if w == "to"
            && ws.get(i + 1).is_some_and(|x| {
                !in_list(x, &DETERMINERS) && !in_list(x, &OBJECT_PRONOUNS) && !in_list(x, &RECIPIENT_HEADS)
            })
        {
            out.push(format!("[{}]_VP", span(i, n)));
            i = n;
        } else if in_list(w, &PREPOSITIONS) {
            let mut j = i + 1;
            while j < n && !in_list(&ws[j], &PREPOSITIONS) {
                j += 1;
            }
            out.push(format!("[{}]_PP", span(i, j)));
            i = j;
        } else {
            let mut j = i + 1;
            while j < n && !in_list(&ws[j], &PREPOSITIONS) && !in_list(&ws[j], &COMPLEMENTIZERS) {
                j += 1;
            }
            if in_list(w, &OBJECT_PRONOUNS) && j > i + 1 && !(w == "her" && j == i + 2) {
                j = i + 1;
            }
            out.push(format!("[{}]_NP", span(i, j)));
            i = j;
        }
    }
    out
}

/// Bare words that head a noun phrase after "to" in the mock templates.
const RECIPIENT_HEADS: [&str; 2] = ["everyone", "someone"];
