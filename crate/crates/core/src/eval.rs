//! Comparisons against published norms.
//!
//! Gold data is read from CSV files the user supplies:
//!
//! | dataset | columns |
//! |---|---|
//! | gahl | `verb,frame,proportion` |
//! | trueswell, garnsey | `verb,bias` |
//! | hawkins | `verb,rating` |
//! | human | `sentence_id,verb,frame` |
//!
//! In gahl files `frame` is either a frame class name (see [`FrameClass`])
//! or a canonical frame string.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cleaning::{filter_alternation, AlternationSpec, ExclusionLedger};
use crate::corpus::{AlternationClass, Lexicon};
use crate::frames::{FrameSignature, FramedRecord, PhraseTag, INTRANSITIVE};
use crate::stats::{self, log_odds_clamped, ols_fit, BayesComparison, Clamp, RegressionResult, StatsError};
use crate::vff::{count_frames, proportions, relabel, RelabelMap, VerbFrameTable};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {reason}")]
    Schema { path: String, row: usize, reason: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("only {shared} shared verbs for {what}; need at least 3")]
    InsufficientData { what: String, shared: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("gold table is {got}, expected {want}")]
    WrongDataset { got: GoldKind, want: &'static str },
    #[error(transparent)]
    Vff(#[from] crate::vff::VffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldKind {
    Gahl,
    Trueswell,
    Garnsey,
    Hawkins,
    Human,
}

impl GoldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GoldKind::Gahl => "gahl",
            GoldKind::Trueswell => "trueswell",
            GoldKind::Garnsey => "garnsey",
            GoldKind::Hawkins => "hawkins",
            GoldKind::Human => "human",
        }
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            GoldKind::Gahl => &["verb", "frame", "proportion"],
            GoldKind::Trueswell | GoldKind::Garnsey => &["verb", "bias"],
            GoldKind::Hawkins => &["verb", "rating"],
            GoldKind::Human => &["sentence_id", "verb", "frame"],
        }
    }
}

impl fmt::Display for GoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The seven frame groups of the broad-coverage norms, or one exact frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameClass {
    Transitive,
    Intransitive,
    Sentence,
    Particle,
    NpSentence,
    Nonfinite,
    ParticleNp,
    Exact(String),
}

impl FrameClass {
    pub const NAMED: [FrameClass; 7] = [
        FrameClass::Intransitive,
        FrameClass::Transitive,
        FrameClass::Sentence,
        FrameClass::Particle,
        FrameClass::ParticleNp,
        FrameClass::NpSentence,
        FrameClass::Nonfinite,
    ];

    pub fn name(&self) -> &str {
        match self {
            FrameClass::Transitive => "transitive",
            FrameClass::Intransitive => "intransitive",
            FrameClass::Sentence => "sentence",
            FrameClass::Particle => "particle",
            FrameClass::NpSentence => "np_sentence",
            FrameClass::Nonfinite => "nonfinite",
            FrameClass::ParticleNp => "particle_np",
            FrameClass::Exact(s) => s,
        }
    }

    /// Whether a canonical frame string belongs to the class. PP
    /// prepositions are ignored by the named classes.
    pub fn contains(&self, frame: &str) -> bool {
        use PhraseTag::*;
        if let FrameClass::Exact(s) = self {
            return s == frame;
        }
        if *self == FrameClass::Intransitive {
            return frame == INTRANSITIVE;
        }
        let Some(sig) = FrameSignature::parse(frame) else {
            return false;
        };
        let tags = sig.tags();
        match self {
            FrameClass::Transitive => tags == [Np],
            FrameClass::Sentence => tags == [Sbar] || tags == [S],
            FrameClass::Particle => tags == [Prt],
            FrameClass::NpSentence => tags == [Np, Sbar] || tags == [Np, S],
            FrameClass::Nonfinite => tags == [Vp],
            FrameClass::ParticleNp => tags == [Prt, Np] || tags == [Np, Prt],
            FrameClass::Intransitive | FrameClass::Exact(_) => unreachable!(),
        }
    }
}

impl FromStr for FrameClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        Ok(match s {
            "transitive" => FrameClass::Transitive,
            "intransitive" => FrameClass::Intransitive,
            "sentence" => FrameClass::Sentence,
            "particle" => FrameClass::Particle,
            "np_sentence" => FrameClass::NpSentence,
            "nonfinite" => FrameClass::Nonfinite,
            "particle_np" => FrameClass::ParticleNp,
            _ => match FrameSignature::parse(s) {
                Some(sig) => FrameClass::Exact(sig.to_string()),
                None => return Err(format!("unknown frame `{s}`")),
            },
        })
    }
}

impl fmt::Display for FrameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GoldValues {
    Proportions(BTreeMap<String, BTreeMap<FrameClass, f64>>),
    /// Per-verb bias or rating.
    Scalar(BTreeMap<String, f64>),
    /// sentence id -> (verb, frame)
    Sentences(BTreeMap<u64, (String, String)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldTable {
    pub kind: GoldKind,
    pub values: GoldValues,
}

impl GoldTable {
    pub fn len(&self) -> usize {
        match &self.values {
            GoldValues::Proportions(m) => m.len(),
            GoldValues::Scalar(m) => m.len(),
            GoldValues::Sentences(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn verbs(&self) -> BTreeSet<&str> {
        match &self.values {
            GoldValues::Proportions(m) => m.keys().map(String::as_str).collect(),
            GoldValues::Scalar(m) => m.keys().map(String::as_str).collect(),
            GoldValues::Sentences(m) => m.values().map(|(v, _)| v.as_str()).collect(),
        }
    }

    /// Frame classes that appear in a proportions table, in a fixed order.
    pub fn frame_classes(&self) -> Vec<FrameClass> {
        let GoldValues::Proportions(m) = &self.values else {
            return Vec::new();
        };
        let present: BTreeSet<&FrameClass> = m.values().flat_map(|r| r.keys()).collect();
        let mut out: Vec<FrameClass> = FrameClass::NAMED
            .iter()
            .filter(|c| present.contains(c))
            .cloned()
            .collect();
        out.extend(
            present
                .into_iter()
                .filter(|c| matches!(c, FrameClass::Exact(_)))
                .cloned(),
        );
        out
    }
}

pub fn load_gold(path: &Path, kind: GoldKind) -> Result<GoldTable, EvalError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_gold(&text, kind, &shown)
}

pub fn parse_gold(text: &str, kind: GoldKind, origin: &str) -> Result<GoldTable, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| EvalError::Schema {
            path: origin.to_string(),
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let mut index = Vec::new();
    for col in kind.columns() {
        let i = headers
            .iter()
            .position(|h| h == *col)
            .ok_or_else(|| EvalError::MissingColumn {
                path: origin.to_string(),
                column: col.to_string(),
            })?;
        index.push(i);
    }
    let mut props: BTreeMap<String, BTreeMap<FrameClass, f64>> = BTreeMap::new();
    let mut scalars: BTreeMap<String, f64> = BTreeMap::new();
    let mut sentences: BTreeMap<u64, (String, String)> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let schema = |reason: String| EvalError::Schema {
            path: origin.to_string(),
            row,
            reason,
        };
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        let field = |k: usize| -> Result<&str, EvalError> {
            match rec.get(index[k]) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(schema(format!("empty `{}`", kind.columns()[k]))),
            }
        };
        let real = |k: usize| -> Result<f64, EvalError> {
            let s = field(k)?;
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| schema(format!("`{s}` is not a number")))
        };
        let verb_at = |k: usize| -> Result<String, EvalError> {
            let v = field(k)?;
            if v != v.to_lowercase() {
                return Err(schema(format!("verb `{v}` is not a lowercase lemma")));
            }
            Ok(v.to_string())
        };
        match kind {
            GoldKind::Gahl => {
                let verb = verb_at(0)?;
                let class: FrameClass = field(1)?.parse().map_err(schema)?;
                let p = real(2)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(schema(format!("proportion {p} outside [0, 1]")));
                }
                if props
                    .entry(verb.clone())
                    .or_default()
                    .insert(class.clone(), p)
                    .is_some()
                {
                    return Err(schema(format!("repeated ({verb}, {class})")));
                }
            }
            GoldKind::Trueswell | GoldKind::Garnsey | GoldKind::Hawkins => {
                let verb = verb_at(0)?;
                if scalars.insert(verb.clone(), real(1)?).is_some() {
                    return Err(schema(format!("repeated verb `{verb}`")));
                }
            }
            GoldKind::Human => {
                let id: u64 = field(0)?
                    .parse()
                    .map_err(|_| schema("sentence_id is not an integer".into()))?;
                let verb = verb_at(1)?;
                let frame = field(2)?;
                let canonical = if frame == INTRANSITIVE {
                    frame.to_string()
                } else {
                    FrameSignature::parse(frame)
                        .ok_or_else(|| schema(format!("`{frame}` is not a frame")))?
                        .to_string()
                };
                if sentences.insert(id, (verb, canonical)).is_some() {
                    return Err(schema(format!("repeated sentence_id {id}")));
                }
            }
        }
    }
    let values = match kind {
        GoldKind::Gahl => GoldValues::Proportions(props),
        GoldKind::Human => GoldValues::Sentences(sentences),
        _ => GoldValues::Scalar(scalars),
    };
    Ok(GoldTable { kind, values })
}

/// One regression together with the points it was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub result: RegressionResult,
    /// (verb, estimate, gold) in verb order.
    pub points: Vec<(String, f64, f64)>,
}

impl Comparison {
    fn fit(points: Vec<(String, f64, f64)>, what: &str) -> Result<Self, EvalError> {
        if points.len() < 3 {
            return Err(EvalError::InsufficientData {
                what: what.to_string(),
                shared: points.len(),
            });
        }
        let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
        Ok(Comparison {
            result: ols_fit(&xs, &ys)?,
            points,
        })
    }
}

/// Sum of a verb's proportions over the frames of a class.
pub fn class_proportion(row: &BTreeMap<String, f64>, class: &FrameClass) -> f64 {
    row.iter().filter(|(f, _)| class.contains(f)).map(|(_, p)| p).sum()
}

/// Regresses gold proportions for `class` on the table's proportions over
/// the shared verbs. With `relabel_pp`, PP-only frames count as
/// intransitive first. `restrict` limits the verb set further.
pub fn compare_frame(
    table: &VerbFrameTable,
    gold: &GoldTable,
    class: &FrameClass,
    relabel_pp: bool,
    restrict: Option<&BTreeSet<String>>,
) -> Result<Comparison, EvalError> {
    let GoldValues::Proportions(g) = &gold.values else {
        return Err(EvalError::WrongDataset {
            got: gold.kind,
            want: "a proportions table",
        });
    };
    let merged;
    let table = if relabel_pp {
        merged = relabel(table, &RelabelMap::pp_as_intransitive())?;
        &merged
    } else {
        table
    };
    let props = proportions(table);
    let points = props
        .iter()
        .filter(|(v, _)| restrict.is_none_or(|r| r.contains(*v)))
        .filter_map(|(v, row)| {
            let y = *g.get(v)?.get(class)?;
            Some((v.clone(), class_proportion(row, class), y))
        })
        .collect();
    Comparison::fit(points, &format!("frame {class}"))
}

fn exact_count(frames: &BTreeMap<String, u64>, wanted: &[&[PhraseTag]]) -> u64 {
    frames
        .iter()
        .filter(|(f, _)| FrameSignature::parse(f).is_some_and(|s| wanted.contains(&s.tags().as_slice())))
        .map(|(_, c)| c)
        .sum()
}

fn biases(
    table: &VerbFrameTable,
    verbs: Option<&BTreeSet<String>>,
    clamp: Clamp,
    split: impl Fn(&BTreeMap<String, u64>) -> (u64, u64),
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (verb, frames) in &table.counts {
        if verbs.is_some_and(|s| !s.contains(verb)) {
            continue;
        }
        let (a, b) = split(frames);
        match log_odds_clamped(a, b, clamp) {
            Ok(x) => {
                out.insert(verb.clone(), x);
            }
            Err(_) => log::warn!("verb `{verb}` has no competing completions; skipped"),
        }
    }
    out
}

/// ln odds of NP over sentential completions per verb. Only frames whose
/// atoms are exactly `[NP]`, `[SBAR]` (or `[S]` when `sc_includes_s`) count.
pub fn npsc_bias(
    table: &VerbFrameTable,
    verbs: Option<&BTreeSet<String>>,
    sc_includes_s: bool,
    clamp: Clamp,
) -> BTreeMap<String, f64> {
    use PhraseTag::*;
    biases(table, verbs, clamp, |frames| {
        let np = exact_count(frames, &[&[Np]]);
        let sc = if sc_includes_s {
            exact_count(frames, &[&[Sbar], &[S]])
        } else {
            exact_count(frames, &[&[Sbar]])
        };
        (np, sc)
    })
}

/// ln odds of double-object (`NP-NP`) over prepositional-object
/// (`NP-PP_to`, `NP-PP_for`) uses per verb.
pub fn dative_bias(table: &VerbFrameTable, verbs: Option<&BTreeSet<String>>, clamp: Clamp) -> BTreeMap<String, f64> {
    biases(table, verbs, clamp, |frames| {
        let get = |f: &str| frames.get(f).copied().unwrap_or(0);
        (get("NP-NP"), get("NP-PP_to") + get("NP-PP_for"))
    })
}

/// Regresses a per-verb gold value (bias norm or rating) on estimated
/// biases over the shared verbs.
pub fn compare_bias(estimates: &BTreeMap<String, f64>, gold: &GoldTable) -> Result<Comparison, EvalError> {
    let GoldValues::Scalar(g) = &gold.values else {
        return Err(EvalError::WrongDataset {
            got: gold.kind,
            want: "a per-verb bias or rating table",
        });
    };
    let points = estimates
        .iter()
        .filter_map(|(v, &x)| g.get(v).map(|&y| (v.clone(), x, y)))
        .collect();
    Comparison::fit(points, &format!("{} biases", gold.kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbAgreement {
    pub verb: String,
    pub rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAgreement {
    pub overall: f64,
    pub n: usize,
    pub per_verb: Vec<VerbAgreement>,
}

/// Sentence id to frame.
type Frames<'a> = BTreeMap<u64, &'a str>;

/// Per-verb and overall share of sentences where the annotator's frame
/// equals the human one. `frames` maps sentence id to (verb, frame).
pub fn human_agreement(
    frames: &BTreeMap<u64, (String, String)>,
    gold: &GoldTable,
) -> Result<HumanAgreement, EvalError> {
    let GoldValues::Sentences(g) = &gold.values else {
        return Err(EvalError::WrongDataset {
            got: gold.kind,
            want: "per-sentence human annotations",
        });
    };
    let ours: BTreeMap<u64, &str> = frames.iter().map(|(id, (_, f))| (*id, f.as_str())).collect();
    let theirs: BTreeMap<u64, &str> = g.iter().map(|(id, (_, f))| (*id, f.as_str())).collect();
    let overall = stats::agreement_rate(&ours, &theirs)?;
    let mut by_verb: BTreeMap<&str, (Frames, Frames)> = BTreeMap::new();
    for (id, (verb, f)) in g {
        if let Some(o) = ours.get(id) {
            let e = by_verb.entry(verb.as_str()).or_default();
            e.0.insert(*id, *o);
            e.1.insert(*id, f.as_str());
        }
    }
    let per_verb = by_verb
        .into_iter()
        .map(|(verb, (a, b))| {
            Ok(VerbAgreement {
                verb: verb.to_string(),
                rate: stats::agreement_rate(&a, &b)?,
                n: a.len(),
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let n = per_verb.iter().map(|v| v.n).sum();
    Ok(HumanAgreement { overall, n, per_verb })
}

/// Everything the evaluation suite needs.
pub struct SuiteInput<'a> {
    pub frames: &'a [FramedRecord],
    pub lexicon: &'a Lexicon,
    pub gold: &'a BTreeMap<GoldKind, GoldTable>,
    pub relabel_pp: bool,
    pub sc_includes_s: bool,
    pub clamp: Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub analysis: String,
    pub dataset: GoldKind,
    pub frame: String,
    pub source: String,
    pub relabel_pp: bool,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesRow {
    pub analysis: String,
    pub dataset: GoldKind,
    pub frame: String,
    pub model_a: String,
    pub model_b: String,
    pub n: usize,
    pub bayes: BayesComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub analysis: String,
    pub source: String,
    pub verb: String,
    pub log_odds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceAgreement {
    pub source_a: String,
    pub source_b: String,
    pub n: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRow {
    pub source: String,
    pub agreement: HumanAgreement,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub sources: Vec<String>,
    pub regressions: Vec<RegressionRow>,
    pub bayes: Vec<BayesRow>,
    pub biases: Vec<BiasRow>,
    pub source_agreement: Vec<SourceAgreement>,
    pub human: Vec<HumanRow>,
    /// Analyses that could not run, with the reason.
    pub skipped: Vec<String>,
}

pub struct SuiteOutput {
    pub report: EvalReport,
    /// Per source: records removed by the dative preposition filter, and
    /// how many records the filter saw.
    pub alternation: BTreeMap<String, (ExclusionLedger, usize)>,
}

fn tables_by_source(frames: &[FramedRecord]) -> BTreeMap<String, VerbFrameTable> {
    let mut by: BTreeMap<&str, Vec<&FramedRecord>> = BTreeMap::new();
    for r in frames {
        by.entry(r.source.as_str()).or_default().push(r);
    }
    by.into_iter()
        .map(|(s, rs)| (s.to_string(), count_frames(rs, s)))
        .collect()
}

fn verbs_with_counts(t: &VerbFrameTable) -> BTreeSet<String> {
    t.counts
        .iter()
        .filter(|(_, f)| f.values().sum::<u64>() > 0)
        .map(|(v, _)| v.clone())
        .collect()
}

fn intersect_all(sets: impl IntoIterator<Item = BTreeSet<String>>, base: BTreeSet<String>) -> BTreeSet<String> {
    sets.into_iter()
        .fold(base, |acc, s| acc.intersection(&s).cloned().collect())
}

fn pairwise(
    report: &mut EvalReport,
    analysis: &str,
    dataset: GoldKind,
    frame: &str,
    fits: &[(String, RegressionResult)],
) {
    for (i, (a, ra)) in fits.iter().enumerate() {
        for (b, rb) in &fits[i + 1..] {
            match stats::bf_bic(ra, rb) {
                Ok(bayes) => report.bayes.push(BayesRow {
                    analysis: analysis.to_string(),
                    dataset,
                    frame: frame.to_string(),
                    model_a: a.clone(),
                    model_b: b.clone(),
                    n: ra.n,
                    bayes,
                }),
                Err(e) => report.skipped.push(format!("{analysis}/{frame}: {a} vs {b}: {e}")),
            }
        }
    }
}

fn frame_suite(report: &mut EvalReport, tables: &BTreeMap<String, VerbFrameTable>, gold: &GoldTable, relabel_pp: bool) {
    let GoldValues::Proportions(g) = &gold.values else {
        return;
    };
    for class in gold.frame_classes() {
        let with_class: BTreeSet<String> = g
            .iter()
            .filter(|(_, r)| r.contains_key(&class))
            .map(|(v, _)| v.clone())
            .collect();
        for (source, t) in tables {
            match compare_frame(t, gold, &class, relabel_pp, Some(&with_class)) {
                Ok(c) => report.regressions.push(RegressionRow {
                    analysis: "frame".into(),
                    dataset: gold.kind,
                    frame: class.to_string(),
                    source: source.clone(),
                    relabel_pp,
                    comparison: c,
                }),
                Err(e) => report.skipped.push(format!("frame/{class}/{source}: {e}")),
            }
        }
        if tables.len() > 1 {
            // Model comparison needs one response vector: refit on shared verbs.
            let shared = intersect_all(tables.values().map(verbs_with_counts), with_class.clone());
            let mut fits = Vec::new();
            for (source, t) in tables {
                match compare_frame(t, gold, &class, relabel_pp, Some(&shared)) {
                    Ok(c) => fits.push((source.clone(), c.result)),
                    Err(e) => report
                        .skipped
                        .push(format!("frame/{class}/{source} on shared verbs: {e}")),
                }
            }
            pairwise(report, "frame", gold.kind, class.name(), &fits);
        }

        if class == FrameClass::Intransitive {
            for (source, t) in tables {
                let merged = compare_frame(t, gold, &class, true, Some(&with_class));
                let plain = compare_frame(t, gold, &class, false, Some(&with_class));
                match (merged, plain) {
                    (Ok(m), Ok(p)) => {
                        let fits = [(format!("{source}+pp_merged"), m.result), (source.clone(), p.result)];
                        for (relabel, c) in [(true, m), (false, p)] {
                            report.regressions.push(RegressionRow {
                                analysis: "intransitivity".into(),
                                dataset: gold.kind,
                                frame: class.to_string(),
                                source: source.clone(),
                                relabel_pp: relabel,
                                comparison: c,
                            });
                        }
                        pairwise(report, "intransitivity", gold.kind, class.name(), &fits);
                    }
                    (Err(e), _) | (_, Err(e)) => report.skipped.push(format!("intransitivity/{source}: {e}")),
                }
            }
        }
    }
}

fn bias_suite(
    report: &mut EvalReport,
    analysis: &str,
    estimates: &BTreeMap<String, BTreeMap<String, f64>>,
    golds: &[&GoldTable],
) {
    for (source, est) in estimates {
        for (verb, x) in est {
            report.biases.push(BiasRow {
                analysis: analysis.to_string(),
                source: source.clone(),
                verb: verb.clone(),
                log_odds: *x,
            });
        }
    }
    for gold in golds {
        for (source, est) in estimates {
            match compare_bias(est, gold) {
                Ok(c) => report.regressions.push(RegressionRow {
                    analysis: analysis.to_string(),
                    dataset: gold.kind,
                    frame: analysis.to_string(),
                    source: source.clone(),
                    relabel_pp: false,
                    comparison: c,
                }),
                Err(e) => report.skipped.push(format!("{analysis}/{}/{source}: {e}", gold.kind)),
            }
        }
        if estimates.len() > 1 {
            let shared = intersect_all(
                estimates.values().map(|e| e.keys().cloned().collect()),
                gold.verbs().into_iter().map(str::to_string).collect(),
            );
            let mut fits = Vec::new();
            for (source, est) in estimates {
                let restricted: BTreeMap<String, f64> = est
                    .iter()
                    .filter(|(v, _)| shared.contains(*v))
                    .map(|(v, x)| (v.clone(), *x))
                    .collect();
                match compare_bias(&restricted, gold) {
                    Ok(c) => fits.push((source.clone(), c.result)),
                    Err(e) => report
                        .skipped
                        .push(format!("{analysis}/{}/{source} on shared verbs: {e}", gold.kind)),
                }
            }
            pairwise(report, analysis, gold.kind, analysis, &fits);
        }
    }
}

/// Runs every analysis the supplied gold data allows.
pub fn run_suite(input: &SuiteInput<'_>) -> Result<SuiteOutput, EvalError> {
    let tables = tables_by_source(input.frames);
    let mut report = EvalReport {
        sources: tables.keys().cloned().collect(),
        ..Default::default()
    };

    if let Some(g) = input.gold.get(&GoldKind::Gahl) {
        frame_suite(&mut report, &tables, g, input.relabel_pp);
    }

    let of_class = |pred: &dyn Fn(AlternationClass) -> bool| -> BTreeSet<String> {
        input
            .lexicon
            .iter()
            .filter(|v| pred(v.alternation_class))
            .map(|v| v.lemma.clone())
            .collect()
    };

    let npsc_verbs = of_class(&|c| c == AlternationClass::NpSc);
    let npsc_filter = (!npsc_verbs.is_empty()).then_some(&npsc_verbs);
    let npsc: BTreeMap<String, BTreeMap<String, f64>> = tables
        .iter()
        .map(|(s, t)| (s.clone(), npsc_bias(t, npsc_filter, input.sc_includes_s, input.clamp)))
        .collect();
    let npsc_gold: Vec<&GoldTable> = [GoldKind::Trueswell, GoldKind::Garnsey]
        .iter()
        .filter_map(|k| input.gold.get(k))
        .collect();
    bias_suite(&mut report, "np_sc", &npsc, &npsc_gold);

    let dative_verbs = of_class(&|c| c.is_dative());
    let mut alternation = BTreeMap::new();
    if dative_verbs.is_empty() {
        report
            .skipped
            .push("dative: no verbs with a dative alternation class".into());
    } else {
        let mut dative = BTreeMap::new();
        for source in tables.keys() {
            let mut kept: Vec<FramedRecord> = input.frames.iter().filter(|r| &r.source == source).cloned().collect();
            let seen = kept.iter().filter(|r| dative_verbs.contains(&r.verb)).count();
            let mut ledger = ExclusionLedger::default();
            for lemma in &dative_verbs {
                let verb = input.lexicon.get(lemma).expect("lemma from the lexicon");
                let (k, l) =
                    filter_alternation(&kept, &AlternationSpec::dative(), verb).expect("verb class checked above");
                kept = k;
                ledger = ledger.merge(l);
            }
            let t = count_frames(&kept, source);
            dative.insert(source.clone(), dative_bias(&t, Some(&dative_verbs), input.clamp));
            alternation.insert(source.clone(), (ledger, seen));
        }
        let hawkins: Vec<&GoldTable> = input.gold.get(&GoldKind::Hawkins).into_iter().collect();
        bias_suite(&mut report, "dative", &dative, &hawkins);
    }

    let by_source: BTreeMap<&str, BTreeMap<u64, (String, String)>> =
        input.frames.iter().fold(BTreeMap::new(), |mut m, r| {
            m.entry(r.source.as_str())
                .or_default()
                .insert(r.sentence_id, (r.verb.clone(), r.frame.clone()));
            m
        });
    let names: Vec<&str> = by_source.keys().copied().collect();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let fa: BTreeMap<u64, &str> = by_source[a].iter().map(|(k, v)| (*k, v.1.as_str())).collect();
            let fb: BTreeMap<u64, &str> = by_source[b].iter().map(|(k, v)| (*k, v.1.as_str())).collect();
            let n = fa.keys().filter(|k| fb.contains_key(k)).count();
            match stats::agreement_rate(&fa, &fb) {
                Ok(rate) => report.source_agreement.push(SourceAgreement {
                    source_a: a.to_string(),
                    source_b: b.to_string(),
                    n,
                    rate,
                }),
                Err(e) => report.skipped.push(format!("agreement/{a} vs {b}: {e}")),
            }
        }
    }
    if let Some(h) = input.gold.get(&GoldKind::Human) {
        for (source, frames) in &by_source {
            match human_agreement(frames, h) {
                Ok(agreement) => report.human.push(HumanRow {
                    source: source.to_string(),
                    agreement,
                }),
                Err(e) => report.skipped.push(format!("human/{source}: {e}")),
            }
        }
    }
    Ok(SuiteOutput { report, alternation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &str, u64)]) -> VerbFrameTable {
        let mut t = VerbFrameTable::new("llm");
        for (v, f, c) in rows {
            t.add(v, f, *c);
        }
        t
    }

    #[test]
    fn gahl_loading() {
        let g = parse_gold(
            "verb,frame,proportion\nlook,intransitive,0.5\nlook,transitive,0.2\n",
            GoldKind::Gahl,
            "g",
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.frame_classes(), [FrameClass::Intransitive, FrameClass::Transitive]);
        let err = parse_gold(
            "verb,frame,proportion\nlook,transitive,0.2\nsee,transitive,1.3\n",
            GoldKind::Gahl,
            "g",
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::Schema { row: 3, .. }), "{err}");
        let err = parse_gold("verb,proportion\nlook,0.2\n", GoldKind::Gahl, "g").unwrap_err();
        assert!(matches!(err, EvalError::MissingColumn { .. }));
        let exact = parse_gold("verb,frame,proportion\ngive,NP-PP_to,0.4\n", GoldKind::Gahl, "g").unwrap();
        assert_eq!(exact.frame_classes(), [FrameClass::Exact("NP-PP_to".into())]);
    }

    #[test]
    fn class_membership() {
        assert!(FrameClass::Transitive.contains("NP"));
        assert!(!FrameClass::Transitive.contains("NP-NP"));
        assert!(FrameClass::Sentence.contains("S"));
        assert!(FrameClass::NpSentence.contains("NP-SBAR"));
        assert!(FrameClass::ParticleNp.contains("NP-PRT"));
        assert!(FrameClass::Intransitive.contains("intransitive"));
        assert!(!FrameClass::Intransitive.contains("PP_to"));
    }

    #[test]
    fn self_comparison_is_exact() {
        let t = table(&[
            ("a", "NP", 1),
            ("a", "intransitive", 3),
            ("b", "NP", 2),
            ("b", "intransitive", 2),
            ("c", "NP", 3),
            ("c", "SBAR", 1),
        ]);
        let gold = parse_gold(
            "verb,frame,proportion\na,transitive,0.25\nb,transitive,0.5\nc,transitive,0.75\n",
            GoldKind::Gahl,
            "g",
        )
        .unwrap();
        let c = compare_frame(&t, &gold, &FrameClass::Transitive, false, None).unwrap();
        assert!((c.result.r2 - 1.0).abs() < 1e-12);
        assert_eq!(c.result.n, 3);
        let only_two: BTreeSet<String> = ["a", "b"].map(String::from).into();
        assert!(matches!(
            compare_frame(&t, &gold, &FrameClass::Transitive, false, Some(&only_two)),
            Err(EvalError::InsufficientData { shared: 2, .. })
        ));
    }

    #[test]
    fn relabel_merges_pp_into_intransitive() {
        let t = table(&[
            ("a", "PP_for", 6),
            ("a", "NP", 4),
            ("b", "PP_at", 2),
            ("b", "intransitive", 2),
            ("b", "NP", 6),
            ("c", "NP", 9),
            ("c", "intransitive", 1),
        ]);
        let gold = parse_gold(
            "verb,frame,proportion\na,intransitive,0.6\nb,intransitive,0.4\nc,intransitive,0.1\n",
            GoldKind::Gahl,
            "g",
        )
        .unwrap();
        let merged = compare_frame(&t, &gold, &FrameClass::Intransitive, true, None).unwrap();
        let plain = compare_frame(&t, &gold, &FrameClass::Intransitive, false, None).unwrap();
        let xs: Vec<f64> = merged.points.iter().map(|p| p.1).collect();
        assert_eq!(xs, [0.6, 0.4, 0.1]);
        assert!((merged.result.r2 - 1.0).abs() < 1e-12);
        assert!(plain.result.r2 < merged.result.r2);
    }

    #[test]
    fn bias_examples() {
        let c = Clamp::default();
        let t = table(&[
            ("accept", "NP", 8),
            ("accept", "SBAR", 2),
            ("know", "NP", 10),
            ("say", "S", 3),
            ("say", "SBAR", 3),
            ("say", "NP", 6),
            ("sleep", "intransitive", 4),
        ]);
        let b = npsc_bias(&t, None, true, c);
        assert!((b["accept"] - 4f64.ln()).abs() < 1e-12);
        assert_eq!(stats::round3(b["know"]), 6.907);
        assert_eq!(b["say"], 0.0);
        assert!(!b.contains_key("sleep"));
        let only_sbar = npsc_bias(&t, None, false, c);
        assert!((only_sbar["say"] - 2f64.ln()).abs() < 1e-12);

        let d = table(&[
            ("loan", "NP-NP", 3),
            ("loan", "NP-PP_to", 1),
            ("donate", "NP-PP_to", 5),
            ("give", "NP-NP", 2),
            ("give", "NP-PP_for", 2),
        ]);
        let b = dative_bias(&d, None, c);
        assert!((b["loan"] - 3f64.ln()).abs() < 1e-12);
        assert_eq!(stats::round3(b["donate"]), -6.907);
        assert_eq!(b["give"], 0.0);
    }

    #[test]
    fn human_rates() {
        let gold_text = (0..100)
            .map(|i| format!("{i},loan,{}", if i < 74 { "NP-NP" } else { "NP-PP_to" }))
            .collect::<Vec<_>>()
            .join("\n");
        let gold = parse_gold(&format!("sentence_id,verb,frame\n{gold_text}\n"), GoldKind::Human, "h").unwrap();
        let ours: BTreeMap<u64, (String, String)> = (0..100).map(|i| (i, ("loan".into(), "NP-NP".into()))).collect();
        let h = human_agreement(&ours, &gold).unwrap();
        assert!((h.overall - 0.74).abs() < 1e-12);
        assert_eq!(h.per_verb[0].n, 100);
        assert!(human_agreement(&BTreeMap::new(), &gold).is_err());
    }
}
