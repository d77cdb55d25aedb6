//! Verb lexicon, generation contexts and sentence records, with their
//! on-disk formats.
//!
//! Verbs and contexts are TSV files with a fixed header line. Sentences are
//! JSON-lines (sentence text may contain tabs or commas) behind a schema
//! header, see [`crate::jsonl`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

pub const VERBS_HEADER: &str = "lemma\tforms\talternation_class\tlocative_preps";
pub const CONTEXTS_HEADER: &str = "number\tcontext";
pub const IRREGULARS_HEADER: &str = "lemma\tforms";
pub const SENTENCES_SCHEMA: &str = "vff.sentences";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("{path}: duplicate {key} on lines {first} and {second}")]
    Duplicate {
        path: String,
        key: String,
        first: usize,
        second: usize,
    },
    #[error("refusing to write an empty record list")]
    Empty,
    #[error("{} sentence(s) reference verbs missing from the lexicon: {}", .0.len(), fmt_unknown(.0))]
    UnknownVerbs(Vec<(u64, String)>),
}

fn fmt_unknown(v: &[(u64, String)]) -> String {
    v.iter()
        .take(5)
        .map(|(id, verb)| format!("id {id} -> {verb}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<JsonlError> for CorpusError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io { path, source } => CorpusError::Io { path, source },
            JsonlError::Malformed { path, line, reason } => CorpusError::Malformed { path, line, reason },
            JsonlError::SchemaMismatch { path, expected, found } => CorpusError::Malformed {
                path,
                line: 1,
                reason: format!("schema header `{found}` does not declare `{expected}`"),
            },
        }
    }
}

/// Structural alternation a verb participates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternationClass {
    DativeTo,
    DativeFor,
    Locative,
    NpSc,
    None,
}

impl AlternationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AlternationClass::DativeTo => "dative_to",
            AlternationClass::DativeFor => "dative_for",
            AlternationClass::Locative => "locative",
            AlternationClass::NpSc => "np_sc",
            AlternationClass::None => "none",
        }
    }

    pub fn is_dative(self) -> bool {
        matches!(self, AlternationClass::DativeTo | AlternationClass::DativeFor)
    }
}

impl fmt::Display for AlternationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlternationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dative_to" => AlternationClass::DativeTo,
            "dative_for" => AlternationClass::DativeFor,
            "locative" => AlternationClass::Locative,
            "np_sc" => AlternationClass::NpSc,
            "none" | "" => AlternationClass::None,
            other => return Err(format!("unknown alternation class `{other}`")),
        })
    }
}

/// One verb of the lexicon.
///
/// `forms` is ordered: base, third person singular, past, past participle,
/// gerund, followed by any variant spellings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbEntry {
    pub lemma: String,
    pub forms: Vec<String>,
    pub alternation_class: AlternationClass,
    pub locative_preps: Vec<String>,
}

const FORM_SLOTS: usize = 5;

impl VerbEntry {
    pub fn new(
        lemma: &str,
        forms: &[&str],
        alternation_class: AlternationClass,
        locative_preps: &[&str],
    ) -> Result<Self, String> {
        let entry = VerbEntry {
            lemma: lemma.to_string(),
            forms: forms.iter().map(|s| s.to_string()).collect(),
            alternation_class,
            locative_preps: locative_preps.iter().map(|s| s.to_string()).collect(),
        };
        entry.validate()?;
        Ok(entry)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.lemma.is_empty() {
            return Err("empty lemma".into());
        }
        if self.lemma != self.lemma.to_lowercase() {
            return Err(format!("lemma `{}` is not lowercase", self.lemma));
        }
        if self.forms.len() < FORM_SLOTS {
            return Err(format!(
                "`{}` lists {} forms; expected base, 3sg, past, past participle, gerund",
                self.lemma,
                self.forms.len()
            ));
        }
        if let Some(bad) = self
            .forms
            .iter()
            .find(|f| f.is_empty() || f.contains(char::is_whitespace))
        {
            return Err(format!("`{}` has an invalid form `{bad}`", self.lemma));
        }
        if !self.forms.contains(&self.lemma) {
            return Err(format!("forms of `{}` do not contain the lemma", self.lemma));
        }
        let locative = self.alternation_class == AlternationClass::Locative;
        if locative == self.locative_preps.is_empty() {
            return Err(format!(
                "`{}`: locative prepositions must be listed exactly when the class is locative",
                self.lemma
            ));
        }
        if let Some(p) = self
            .locative_preps
            .iter()
            .find(|p| p.is_empty() || **p != p.to_lowercase())
        {
            return Err(format!("`{}`: invalid locative preposition `{p}`", self.lemma));
        }
        Ok(())
    }

    pub fn past_participle(&self) -> &str {
        &self.forms[3]
    }

    /// True when the case-folded `word` is one of this verb's forms.
    pub fn has_form(&self, word: &str) -> bool {
        self.forms
            .iter()
            .any(|f| f.eq_ignore_ascii_case(word) || f.to_lowercase() == word)
    }

    fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.lemma,
            self.forms.join(","),
            self.alternation_class,
            self.locative_preps.join(",")
        )
    }
}

fn split_list(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(|x| x.trim().to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEntry {
    pub number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: u64,
    #[serde(rename = "verb")]
    pub verb_lemma: String,
    pub context_number: Option<u32>,
    pub text: String,
    pub batch_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Verbs,
    Contexts,
    Sentences,
}

/// Schema-homogeneous record list as read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusRecords {
    Verbs(Vec<VerbEntry>),
    Contexts(Vec<ContextEntry>),
    Sentences(Vec<SentenceRecord>),
}

impl CorpusRecords {
    pub fn len(&self) -> usize {
        match self {
            CorpusRecords::Verbs(v) => v.len(),
            CorpusRecords::Contexts(c) => c.len(),
            CorpusRecords::Sentences(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_text(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Data lines of a TSV file after checking its header, with line numbers.
fn tsv_rows<'a>(text: &'a str, path: &str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, CorpusError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == header => {}
        Some((_, h)) => {
            return Err(CorpusError::Malformed {
                path: path.into(),
                line: 1,
                reason: format!("header `{h}` does not match `{}`", header.replace('\t', "<TAB>")),
            })
        }
        None => {
            return Err(CorpusError::Malformed {
                path: path.into(),
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let columns = header.split('\t').count();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns {
            return Err(CorpusError::Malformed {
                path: path.into(),
                line: idx + 1,
                reason: format!("expected {columns} tab-separated columns, found {}", cells.len()),
            });
        }
        rows.push((idx + 1, cells));
    }
    Ok(rows)
}

fn check_unique<K: std::hash::Hash + Eq + fmt::Display>(
    path: &str,
    what: &str,
    keys: impl Iterator<Item = (K, usize)>,
) -> Result<(), CorpusError> {
    let mut seen: HashMap<K, usize> = HashMap::new();
    for (key, line) in keys {
        let label = format!("{what} {key}");
        if let Some(first) = seen.insert(key, line) {
            return Err(CorpusError::Duplicate {
                path: path.into(),
                key: label,
                first,
                second: line,
            });
        }
    }
    Ok(())
}

pub fn load_verbs(path: &Path) -> Result<Vec<VerbEntry>, CorpusError> {
    parse_verbs(&read_text(path)?, &path.display().to_string())
}

pub fn parse_verbs(text: &str, origin: &str) -> Result<Vec<VerbEntry>, CorpusError> {
    let mut out = Vec::new();
    let mut lines = Vec::new();
    for (line, cells) in tsv_rows(text, origin, VERBS_HEADER)? {
        let malformed = |reason: String| CorpusError::Malformed {
            path: origin.into(),
            line,
            reason,
        };
        let class = cells[2].parse::<AlternationClass>().map_err(malformed)?;
        let entry = VerbEntry {
            lemma: cells[0].to_string(),
            forms: split_list(cells[1]),
            alternation_class: class,
            locative_preps: split_list(cells[3]),
        };
        entry.validate().map_err(malformed)?;
        lines.push(line);
        out.push(entry);
    }
    check_unique(origin, "lemma", out.iter().map(|v| v.lemma.clone()).zip(lines))?;
    Ok(out)
}

pub fn load_contexts(path: &Path) -> Result<Vec<ContextEntry>, CorpusError> {
    parse_contexts(&read_text(path)?, &path.display().to_string())
}

pub fn parse_contexts(text: &str, origin: &str) -> Result<Vec<ContextEntry>, CorpusError> {
    let mut out = Vec::new();
    let mut lines = Vec::new();
    for (line, cells) in tsv_rows(text, origin, CONTEXTS_HEADER)? {
        let malformed = |reason: String| CorpusError::Malformed {
            path: origin.into(),
            line,
            reason,
        };
        let number: u32 = cells[0]
            .parse()
            .map_err(|_| malformed(format!("context number `{}` is not a positive integer", cells[0])))?;
        if number == 0 {
            return Err(malformed("context numbers start at 1".into()));
        }
        if cells[1].trim().is_empty() {
            return Err(malformed("empty context text".into()));
        }
        lines.push(line);
        out.push(ContextEntry {
            number,
            text: cells[1].to_string(),
        });
    }
    check_unique(origin, "context number", out.iter().map(|c| c.number).zip(lines))?;
    Ok(out)
}

pub fn load_sentences(path: &Path) -> Result<Vec<SentenceRecord>, CorpusError> {
    let rows = jsonl::read::<SentenceRecord>(path, SENTENCES_SCHEMA)?;
    finish_sentences(rows, &path.display().to_string())
}

pub fn parse_sentences(text: &str, origin: &str) -> Result<Vec<SentenceRecord>, CorpusError> {
    let rows = jsonl::parse::<SentenceRecord>(text, origin, SENTENCES_SCHEMA)?;
    finish_sentences(rows, origin)
}

fn finish_sentences(
    rows: Vec<jsonl::Numbered<SentenceRecord>>,
    origin: &str,
) -> Result<Vec<SentenceRecord>, CorpusError> {
    for r in &rows {
        if r.value.text.trim().is_empty() {
            return Err(CorpusError::Malformed {
                path: origin.into(),
                line: r.line,
                reason: "empty sentence text".into(),
            });
        }
        if r.value.verb_lemma.is_empty() {
            return Err(CorpusError::Malformed {
                path: origin.into(),
                line: r.line,
                reason: "empty verb".into(),
            });
        }
    }
    check_unique(origin, "id", rows.iter().map(|r| (r.value.id, r.line)))?;
    Ok(rows.into_iter().map(|r| r.value).collect())
}

pub fn load_corpus(path: &Path, kind: CorpusKind) -> Result<CorpusRecords, CorpusError> {
    Ok(match kind {
        CorpusKind::Verbs => CorpusRecords::Verbs(load_verbs(path)?),
        CorpusKind::Contexts => CorpusRecords::Contexts(load_contexts(path)?),
        CorpusKind::Sentences => CorpusRecords::Sentences(load_sentences(path)?),
    })
}

/// Serializes records exactly as [`store_corpus`] writes them.
pub fn render_corpus(records: &CorpusRecords) -> Result<String, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(match records {
        CorpusRecords::Verbs(v) => {
            let mut out = format!("{VERBS_HEADER}\n");
            for e in v {
                out.push_str(&e.to_tsv());
                out.push('\n');
            }
            out
        }
        CorpusRecords::Contexts(c) => {
            let mut out = format!("{CONTEXTS_HEADER}\n");
            for e in c {
                out.push_str(&format!("{}\t{}\n", e.number, e.text));
            }
            out
        }
        CorpusRecords::Sentences(s) => jsonl::render(SENTENCES_SCHEMA, s),
    })
}

pub fn store_corpus(records: &CorpusRecords, path: &Path) -> Result<(), CorpusError> {
    let text = render_corpus(records)?;
    fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The verb lexicon keyed by lemma.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    verbs: BTreeMap<String, VerbEntry>,
}

impl Lexicon {
    pub fn new(verbs: Vec<VerbEntry>) -> Self {
        Lexicon {
            verbs: verbs.into_iter().map(|v| (v.lemma.clone(), v)).collect(),
        }
    }

    pub fn get(&self, lemma: &str) -> Option<&VerbEntry> {
        self.verbs.get(lemma)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerbEntry> {
        self.verbs.values()
    }

    pub fn len(&self) -> usize {
        self.verbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verbs.is_empty()
    }

    /// Replaces the form lists of the listed lemmas (irregular verbs).
    pub fn apply_overrides(&mut self, overrides: &[(String, Vec<String>)]) -> Result<(), String> {
        for (lemma, forms) in overrides {
            let entry = self
                .verbs
                .get_mut(lemma)
                .ok_or_else(|| format!("override for unknown verb `{lemma}`"))?;
            let mut patched = entry.clone();
            patched.forms = forms.clone();
            patched.validate()?;
            *entry = patched;
        }
        Ok(())
    }

    /// Every sentence must name a lexicon verb; all violations are reported.
    pub fn check_references(&self, sentences: &[SentenceRecord]) -> Result<(), CorpusError> {
        let unknown: Vec<(u64, String)> = sentences
            .iter()
            .filter(|s| !self.verbs.contains_key(&s.verb_lemma))
            .map(|s| (s.id, s.verb_lemma.clone()))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::UnknownVerbs(unknown))
        }
    }
}

/// Irregular-form override table: `lemma<TAB>forms`.
pub fn load_irregulars(path: &Path) -> Result<Vec<(String, Vec<String>)>, CorpusError> {
    let origin = path.display().to_string();
    let text = read_text(path)?;
    let rows = tsv_rows(&text, &origin, IRREGULARS_HEADER)?;
    check_unique(&origin, "lemma", rows.iter().map(|(l, c)| (c[0].to_string(), *l)))?;
    Ok(rows
        .into_iter()
        .map(|(_, c)| (c[0].to_string(), split_list(c[1])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn give() -> VerbEntry {
        VerbEntry::new(
            "give",
            &["give", "gives", "gave", "given", "giving"],
            AlternationClass::DativeTo,
            &[],
        )
        .unwrap()
    }

    #[test]
    fn minimal_sentence_file() {
        let text = "{\"schema\":\"vff.sentences\"}\n{\"id\":1,\"verb\":\"give\",\"context_number\":null,\"text\":\"Stop!\",\"batch_id\":\"b1\"}\n";
        let s = parse_sentences(text, "s.jsonl").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, 1);
        assert_eq!(s[0].text, "Stop!");
        assert_eq!(s[0].verb_lemma, "give");
    }

    #[test]
    fn duplicate_ids_name_both_lines() {
        let text = "{\"id\":7,\"verb\":\"give\",\"context_number\":1,\"text\":\"a\",\"batch_id\":\"b\"}\n{\"id\":8,\"verb\":\"give\",\"context_number\":1,\"text\":\"b\",\"batch_id\":\"b\"}\n{\"id\":7,\"verb\":\"give\",\"context_number\":1,\"text\":\"c\",\"batch_id\":\"b\"}\n";
        match parse_sentences(text, "s.jsonl").unwrap_err() {
            CorpusError::Duplicate { first, second, key, .. } => {
                assert_eq!((first, second), (1, 3));
                assert_eq!(key, "id 7");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "{\"schema\":\"vff.sentences\"}\n{\"id\":1}\n";
        match parse_sentences(text, "s.jsonl").unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn store_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        assert!(matches!(
            store_corpus(&CorpusRecords::Sentences(vec![]), &path),
            Err(CorpusError::Empty)
        ));
        assert!(!path.exists());
    }

    #[test]
    fn single_record_is_header_plus_line() {
        let recs = CorpusRecords::Contexts(vec![ContextEntry {
            number: 1,
            text: "at the beach".into(),
        }]);
        assert_eq!(render_corpus(&recs).unwrap(), "number\tcontext\n1\tat the beach\n");
    }

    #[test]
    fn verb_invariants() {
        assert!(VerbEntry::new(
            "Give",
            &["Give", "gives", "gave", "given", "giving"],
            AlternationClass::None,
            &[]
        )
        .is_err());
        assert!(VerbEntry::new(
            "give",
            &["gives", "gave", "given", "giving", "gived"],
            AlternationClass::None,
            &[]
        )
        .is_err());
        assert!(VerbEntry::new(
            "load",
            &["load", "loads", "loaded", "loaded", "loading"],
            AlternationClass::Locative,
            &[]
        )
        .is_err());
        assert!(VerbEntry::new(
            "load",
            &["load", "loads", "loaded", "loaded", "loading"],
            AlternationClass::None,
            &["onto"]
        )
        .is_err());
        let load = VerbEntry::new(
            "load",
            &["load", "loads", "loaded", "loaded", "loading"],
            AlternationClass::Locative,
            &["onto", "with"],
        )
        .unwrap();
        assert_eq!(load.past_participle(), "loaded");
        assert_eq!(give().past_participle(), "given");
    }

    #[test]
    fn verbs_tsv_roundtrip_and_header_check() {
        let text = format!("{VERBS_HEADER}\ngive\tgive,gives,gave,given,giving\tdative_to\t\nload\tload,loads,loaded,loaded,loading\tlocative\tonto,with\n");
        let verbs = parse_verbs(&text, "v.tsv").unwrap();
        assert_eq!(verbs[1].locative_preps, ["onto", "with"]);
        assert_eq!(render_corpus(&CorpusRecords::Verbs(verbs)).unwrap(), text);
        assert!(parse_verbs("lemma\tforms\n", "v.tsv").is_err());
    }

    #[test]
    fn referential_integrity_reports_all() {
        let lex = Lexicon::new(vec![give()]);
        let s = |id, verb: &str| SentenceRecord {
            id,
            verb_lemma: verb.into(),
            context_number: None,
            text: "x".into(),
            batch_id: "b".into(),
        };
        lex.check_references(&[s(1, "give")]).unwrap();
        match lex.check_references(&[s(1, "give"), s(2, "eat"), s(3, "run")]) {
            Err(CorpusError::UnknownVerbs(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_replace_forms() {
        let mut lex = Lexicon::new(vec![VerbEntry::new(
            "give",
            &["give", "gives", "gived", "gived", "giving"],
            AlternationClass::None,
            &[],
        )
        .unwrap()]);
        lex.apply_overrides(&[(
            "give".into(),
            ["give", "gives", "gave", "given", "giving"].map(String::from).to_vec(),
        )])
        .unwrap();
        assert_eq!(lex.get("give").unwrap().past_participle(), "given");
        assert!(lex.apply_overrides(&[("eat".into(), vec![])]).is_err());
    }
}
