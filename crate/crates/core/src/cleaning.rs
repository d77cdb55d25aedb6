//! Exclusion rules applied between annotation and counting.
//!
//! Every removed sentence lands in an [`ExclusionLedger`] under exactly one
//! rule. Rules run in a fixed order (missing annotation, no clause with the
//! verb, not used as a verb, hallucinated argument, passive) and the first
//! rule that fires claims the sentence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Lexicon, SentenceRecord, VerbEntry};
use crate::frames::{
    frame_from_arguments, AnnotationError, Argument, Arguments, FrameSignature, FramedRecord, PhraseTag, TreeFrame,
};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionRule {
    GatewayMissing,
    NoVerbClause,
    NotAVerb,
    HallucinatedArgument,
    Passive,
    AlternationPrep,
}

impl ExclusionRule {
    pub const ALL: [ExclusionRule; 6] = [
        ExclusionRule::GatewayMissing,
        ExclusionRule::NoVerbClause,
        ExclusionRule::NotAVerb,
        ExclusionRule::HallucinatedArgument,
        ExclusionRule::Passive,
        ExclusionRule::AlternationPrep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionRule::GatewayMissing => "gateway_missing",
            ExclusionRule::NoVerbClause => "no_verb_clause",
            ExclusionRule::NotAVerb => "not_a_verb",
            ExclusionRule::HallucinatedArgument => "hallucinated_argument",
            ExclusionRule::Passive => "passive",
            ExclusionRule::AlternationPrep => "alternation_prep",
        }
    }
}

impl fmt::Display for ExclusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub sentence_id: u64,
    pub rule: ExclusionRule,
    pub detail: String,
}

pub const LEDGER_SCHEMA: &str = "vff.exclusions";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionLedger {
    entries: BTreeMap<u64, LedgerEntry>,
}

impl ExclusionLedger {
    /// Records an exclusion; a sentence keeps its first attributed rule.
    pub fn record(&mut self, sentence_id: u64, rule: ExclusionRule, detail: impl Into<String>) -> bool {
        if self.entries.contains_key(&sentence_id) {
            return false;
        }
        self.entries.insert(
            sentence_id,
            LedgerEntry {
                sentence_id,
                rule,
                detail: detail.into(),
            },
        );
        true
    }

    pub fn contains(&self, sentence_id: u64) -> bool {
        self.entries.contains_key(&sentence_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by sentence id.
    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn counts(&self) -> BTreeMap<ExclusionRule, usize> {
        let mut out = BTreeMap::new();
        for e in self.entries.values() {
            *out.entry(e.rule).or_insert(0) += 1;
        }
        out
    }

    pub fn count(&self, rule: ExclusionRule) -> usize {
        self.entries.values().filter(|e| e.rule == rule).count()
    }

    /// Union of two ledgers; on a shared id the entry from `self` wins.
    pub fn merge(mut self, other: ExclusionLedger) -> ExclusionLedger {
        for (id, e) in other.entries {
            self.entries.entry(id).or_insert(e);
        }
        self
    }

    /// exclusions.tsv: one row per rule that fired plus a total row, with
    /// percentages of `input_total` at 3 decimals.
    pub fn render_report(&self, input_total: usize) -> String {
        let mut out = String::from("rule\tcount\tpercent\n");
        if self.is_empty() {
            return out;
        }
        let pct = |n: usize| {
            if input_total == 0 {
                0.0
            } else {
                100.0 * n as f64 / input_total as f64
            }
        };
        for (rule, n) in self.counts() {
            out.push_str(&format!("{rule}\t{n}\t{:.3}\n", pct(n)));
        }
        out.push_str(&format!("total\t{}\t{:.3}\n", self.len(), pct(self.len())));
        out
    }
}

/// The first comma-delimited piece of the sentence that contains a form of
/// the verb, trimmed.
pub fn clause_containing_verb(record: &SentenceRecord, verb: &VerbEntry) -> Option<String> {
    record
        .text
        .split(',')
        .find(|piece| text::words(piece).iter().any(|w| verb.has_form(w)))
        .map(|piece| piece.trim().to_string())
}

/// Checks that every span occurs in the sentence after case folding and
/// whitespace normalization. Returns the first absent span.
pub fn verify_arguments_present(args: &[Argument], sentence: &str) -> Result<(), String> {
    let hay = text::normalize(sentence);
    match args.iter().find(|a| !hay.contains(&text::normalize(&a.span))) {
        Some(a) => Err(a.span.clone()),
        None => Ok(()),
    }
}

const BE_GET: [&str; 12] = [
    "be", "am", "is", "are", "was", "were", "been", "being", "get", "gets", "got", "gotten",
];

pub const DEFAULT_PASSIVE_WINDOW: usize = 3;

/// Token heuristic: the first verb form in the clause is the past
/// participle and a form of `be` or `get` occurs within `window` tokens
/// before it.
pub fn detect_passive(clause: &str, verb: &VerbEntry, window: usize) -> bool {
    let words = text::words(clause);
    let Some(pos) = words.iter().position(|w| verb.has_form(w)) else {
        return false;
    };
    if words[pos] != verb.past_participle().to_lowercase() {
        return false;
    }
    words[pos.saturating_sub(window)..pos]
        .iter()
        .any(|w| BE_GET.contains(&w.as_str()) || w == "getting")
}

/// What an annotator produced for a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotation {
    Llm(Arguments),
    Tree(TreeFrame),
    /// No usable annotation came back from the gateway.
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRecord {
    pub sentence: SentenceRecord,
    pub source: String,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleaningRules {
    pub enabled: BTreeSet<ExclusionRule>,
    pub passive_window: usize,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            enabled: ExclusionRule::ALL.into_iter().collect(),
            passive_window: DEFAULT_PASSIVE_WINDOW,
        }
    }
}

impl CleaningRules {
    fn on(&self, rule: ExclusionRule) -> bool {
        self.enabled.contains(&rule)
    }
}

fn first_exclusion(
    r: &AnnotatedRecord,
    verb: Option<&VerbEntry>,
    rules: &CleaningRules,
) -> Option<(ExclusionRule, String)> {
    use ExclusionRule::*;
    if let Annotation::Missing(why) = &r.annotation {
        if rules.on(GatewayMissing) {
            return Some((GatewayMissing, why.clone()));
        }
    }
    let Some(verb) = verb else {
        return Some((NoVerbClause, format!("verb `{}` not in lexicon", r.sentence.verb_lemma)));
    };
    let clause = clause_containing_verb(&r.sentence, verb);
    if rules.on(NoVerbClause) {
        if clause.is_none() {
            return Some((NoVerbClause, format!("no clause contains a form of `{}`", verb.lemma)));
        }
        if r.annotation == Annotation::Tree(TreeFrame::NotFound) {
            return Some((NoVerbClause, "verb not found in tree".into()));
        }
    }
    if rules.on(NotAVerb) {
        match &r.annotation {
            Annotation::Llm(Arguments::NotAVerb) => return Some((NotAVerb, "annotator returned NA".into())),
            Annotation::Tree(TreeFrame::NotAVerb) => {
                return Some((NotAVerb, "verb form only under a non-verbal tag".into()))
            }
            _ => {}
        }
    }
    if rules.on(HallucinatedArgument) {
        if let Annotation::Llm(Arguments::Args(args)) = &r.annotation {
            if let Err(span) = verify_arguments_present(args, &r.sentence.text) {
                return Some((HallucinatedArgument, span));
            }
        }
    }
    if rules.on(Passive) {
        if let Some(c) = &clause {
            if detect_passive(c, verb, rules.passive_window) {
                return Some((Passive, c.clone()));
            }
        }
    }
    None
}

/// Splits annotated records into kept records and a ledger of the rest.
/// Kept records stay in input order.
pub fn apply_exclusions(
    records: Vec<AnnotatedRecord>,
    lexicon: &Lexicon,
    rules: &CleaningRules,
) -> (Vec<AnnotatedRecord>, ExclusionLedger) {
    let mut ledger = ExclusionLedger::default();
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        let verb = lexicon.get(&r.sentence.verb_lemma);
        match first_exclusion(&r, verb, rules) {
            Some((rule, detail)) => {
                ledger.record(r.sentence.id, rule, detail);
            }
            None => kept.push(r),
        }
    }
    (kept, ledger)
}

/// Frame strings for records that survived [`apply_exclusions`].
pub fn to_framed(kept: &[AnnotatedRecord]) -> Result<Vec<FramedRecord>, (u64, AnnotationError)> {
    kept.iter()
        .filter_map(|r| {
            let frame = match &r.annotation {
                Annotation::Llm(a) => frame_from_arguments(a),
                Annotation::Tree(TreeFrame::Frame(f)) => Ok(f.clone()),
                Annotation::Tree(_) | Annotation::Missing(_) => return None,
            };
            Some(
                frame
                    .map(|f| FramedRecord {
                        sentence_id: r.sentence.id,
                        source: r.source.clone(),
                        verb: r.sentence.verb_lemma.clone(),
                        frame: f.to_string(),
                    })
                    .map_err(|e| (r.sentence.id, e)),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlternationKind {
    Dative,
    Locative,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlternationSpec {
    pub kind: AlternationKind,
    pub allowed_preps: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlternationError {
    #[error("verb `{verb}` has alternation class `{class}`, not usable for a {kind:?} filter")]
    ClassMismatch {
        verb: String,
        class: String,
        kind: AlternationKind,
    },
    #[error("alternation filter with no allowed prepositions")]
    EmptyPreps,
}

impl AlternationSpec {
    pub fn dative() -> Self {
        AlternationSpec {
            kind: AlternationKind::Dative,
            allowed_preps: ["to", "for"].map(String::from).into(),
        }
    }

    pub fn locative(verb: &VerbEntry) -> Self {
        AlternationSpec {
            kind: AlternationKind::Locative,
            allowed_preps: verb.locative_preps.iter().cloned().collect(),
        }
    }

    /// The filter matching a verb's class, if it has one.
    pub fn for_verb(verb: &VerbEntry) -> Option<Self> {
        if verb.alternation_class.is_dative() {
            Some(Self::dative())
        } else if verb.alternation_class == crate::corpus::AlternationClass::Locative {
            Some(Self::locative(verb))
        } else {
            None
        }
    }
}

/// For NP-PP frames of `verb`, drops those whose preposition the
/// alternation does not license. Other frames, and other verbs' records,
/// pass through.
pub fn filter_alternation(
    records: &[FramedRecord],
    spec: &AlternationSpec,
    verb: &VerbEntry,
) -> Result<(Vec<FramedRecord>, ExclusionLedger), AlternationError> {
    let class_ok = match spec.kind {
        AlternationKind::Dative => verb.alternation_class.is_dative(),
        AlternationKind::Locative => verb.alternation_class == crate::corpus::AlternationClass::Locative,
    };
    if !class_ok {
        return Err(AlternationError::ClassMismatch {
            verb: verb.lemma.clone(),
            class: verb.alternation_class.to_string(),
            kind: spec.kind,
        });
    }
    if spec.allowed_preps.is_empty() {
        return Err(AlternationError::EmptyPreps);
    }
    let mut kept = Vec::new();
    let mut ledger = ExclusionLedger::default();
    for r in records {
        if r.verb != verb.lemma {
            kept.push(r.clone());
            continue;
        }
        match np_pp_prep(&r.frame) {
            Some(prep) if !prep.as_deref().is_some_and(|p| spec.allowed_preps.contains(p)) => {
                ledger.record(
                    r.sentence_id,
                    ExclusionRule::AlternationPrep,
                    format!("{} not licensed for {}", r.frame, verb.lemma),
                );
            }
            _ => kept.push(r.clone()),
        }
    }
    Ok((kept, ledger))
}

/// `Some(prep)` when the frame is exactly NP followed by a PP.
fn np_pp_prep(frame: &str) -> Option<Option<String>> {
    let sig = FrameSignature::parse(frame)?;
    match sig.atoms.as_slice() {
        [np, pp] if np.tag == PhraseTag::Np && np.prep.is_none() && pp.tag == PhraseTag::Pp => Some(pp.prep.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AlternationClass;

    fn verb(lemma: &str, forms: &[&str]) -> VerbEntry {
        VerbEntry::new(lemma, forms, AlternationClass::None, &[]).unwrap()
    }

    fn sentence(id: u64, verb: &str, text: &str) -> SentenceRecord {
        SentenceRecord {
            id,
            verb_lemma: verb.into(),
            context_number: Some(1),
            text: text.into(),
            batch_id: "b".into(),
        }
    }

    fn trip() -> VerbEntry {
        verb("trip", &["trip", "trips", "tripped", "tripped", "tripping"])
    }

    #[test]
    fn clause_selection() {
        let stop = verb("stop", &["stop", "stops", "stopped", "stopped", "stopping"]);
        assert_eq!(
            clause_containing_verb(&sentence(1, "stop", "Stop!"), &stop).as_deref(),
            Some("Stop!")
        );
        let s = sentence(2, "trip", "While running in the surf, she tripped over driftwood.");
        assert_eq!(
            clause_containing_verb(&s, &trip()).as_deref(),
            Some("she tripped over driftwood.")
        );
        let give = verb("give", &["give", "gives", "gave", "given", "giving"]);
        assert_eq!(
            clause_containing_verb(&sentence(3, "give", "Well, you know, whatever."), &give),
            None
        );
        // word-boundary: "stopwatch" is not "stop"
        assert_eq!(
            clause_containing_verb(&sentence(4, "stop", "Check the stopwatch."), &stop),
            None
        );
    }

    #[test]
    fn argument_presence() {
        let args = [
            Argument::new("me", PhraseTag::Np),
            Argument::new("a cake", PhraseTag::Np),
        ];
        assert!(verify_arguments_present(&args, "She gave me a cake on my birthday.").is_ok());
        let ball = [Argument::new("the ball", PhraseTag::Np)];
        assert_eq!(
            verify_arguments_present(&ball, "She gave me a cake."),
            Err("the ball".into())
        );
        let spaced = [Argument::new("A  Cake", PhraseTag::Np)];
        assert!(verify_arguments_present(&spaced, "She baked   a cake today.").is_ok());
    }

    #[test]
    fn passive_heuristic() {
        let eat = verb("eat", &["eat", "eats", "ate", "eaten", "eating"]);
        assert!(detect_passive("the melon was eaten", &eat, 3));
        assert!(!detect_passive("She ate the melon", &eat, 3));
        assert!(!detect_passive("She has eaten the melon", &eat, 3));
        let promote = verb("promote", &["promote", "promotes", "promoted", "promoted", "promoting"]);
        assert!(detect_passive("He got promoted quickly", &promote, 3));
        assert!(!detect_passive("was very much not quite promoted", &promote, 3));
        assert!(detect_passive("was very much not quite promoted", &promote, 5));
    }

    fn lexicon() -> Lexicon {
        Lexicon::new(vec![
            verb("party", &["party", "parties", "partied", "partied", "partying"]),
            verb("eat", &["eat", "eats", "ate", "eaten", "eating"]),
            verb("give", &["give", "gives", "gave", "given", "giving"]),
        ])
    }

    fn llm(id: u64, v: &str, text: &str, ann: &str) -> AnnotatedRecord {
        AnnotatedRecord {
            sentence: sentence(id, v, text),
            source: "llm".into(),
            annotation: Annotation::Llm(crate::frames::parse_argument_annotation(ann).unwrap()),
        }
    }

    #[test]
    fn one_violation_per_rule() {
        let recs = vec![
            llm(1, "eat", "She ate the melon.", "[the melon]_NP"),
            llm(2, "eat", "Dinner is served, come on.", "[intransitive]"),
            llm(3, "party", "I never thought a party could turn so somber.", "NA"),
            llm(4, "give", "She gave me a cake.", "[me]_NP [the ball]_NP"),
            llm(5, "eat", "The melon was eaten.", "[intransitive]"),
            llm(6, "give", "I gave at the office.", "[intransitive]"),
        ];
        let (kept, ledger) = apply_exclusions(recs, &lexicon(), &CleaningRules::default());
        assert_eq!(kept.len(), 2);
        assert_eq!(ledger.count(ExclusionRule::NoVerbClause), 1);
        assert_eq!(ledger.count(ExclusionRule::NotAVerb), 1);
        assert_eq!(ledger.count(ExclusionRule::HallucinatedArgument), 1);
        assert_eq!(ledger.count(ExclusionRule::Passive), 1);
        let (again_kept, again) = apply_exclusions(kept.clone(), &lexicon(), &CleaningRules::default());
        assert!(again.is_empty());
        assert_eq!(again_kept, kept);
    }

    #[test]
    fn rule_order_attributes_first_cause() {
        // NA and passive at once: not_a_verb comes first
        let r = llm(9, "eat", "It was eaten.", "NA");
        let (_, ledger) = apply_exclusions(vec![r], &lexicon(), &CleaningRules::default());
        assert_eq!(ledger.entries().next().unwrap().rule, ExclusionRule::NotAVerb);
    }

    #[test]
    fn missing_and_tree_outcomes() {
        let mut m = llm(1, "eat", "She ate.", "[intransitive]");
        m.annotation = Annotation::Missing("missing".into());
        let mut t = llm(2, "eat", "She ate.", "[intransitive]");
        t.annotation = Annotation::Tree(TreeFrame::NotFound);
        let mut n = llm(3, "eat", "She ate.", "[intransitive]");
        n.annotation = Annotation::Tree(TreeFrame::NotAVerb);
        let (kept, ledger) = apply_exclusions(vec![m, t, n], &lexicon(), &CleaningRules::default());
        assert!(kept.is_empty());
        let rules: Vec<_> = ledger.entries().map(|e| e.rule).collect();
        assert_eq!(
            rules,
            [
                ExclusionRule::GatewayMissing,
                ExclusionRule::NoVerbClause,
                ExclusionRule::NotAVerb
            ]
        );
    }

    #[test]
    fn report_percentages() {
        let mut l = ExclusionLedger::default();
        for id in 0..3087 {
            l.record(id, ExclusionRule::NotAVerb, "");
        }
        assert!(!l.record(0, ExclusionRule::Passive, ""));
        let report = l.render_report(64_589);
        assert!(report.ends_with("total\t3087\t4.779\n"), "{report}");
        assert_eq!(ExclusionLedger::default().render_report(10), "rule\tcount\tpercent\n");
    }

    fn framed(id: u64, v: &str, frame: &str) -> FramedRecord {
        FramedRecord {
            sentence_id: id,
            source: "llm".into(),
            verb: v.into(),
            frame: frame.into(),
        }
    }

    #[test]
    fn dative_filter() {
        let loan = VerbEntry::new(
            "loan",
            &["loan", "loans", "loaned", "loaned", "loaning"],
            AlternationClass::DativeTo,
            &[],
        )
        .unwrap();
        let recs = [
            framed(1, "loan", "NP-PP_to"),
            framed(2, "loan", "NP-PP_with"),
            framed(3, "loan", "NP-NP"),
            framed(4, "loan", "NP"),
            framed(5, "loan", "NP-PP_for"),
        ];
        let (kept, ledger) = filter_alternation(&recs, &AlternationSpec::dative(), &loan).unwrap();
        assert_eq!(kept.iter().map(|r| r.sentence_id).collect::<Vec<_>>(), [1, 3, 4, 5]);
        assert_eq!(ledger.count(ExclusionRule::AlternationPrep), 1);
        assert!(ledger.contains(2));
    }

    #[test]
    fn locative_filter_and_mismatch() {
        let load = VerbEntry::new(
            "load",
            &["load", "loads", "loaded", "loaded", "loading"],
            AlternationClass::Locative,
            &["onto", "with"],
        )
        .unwrap();
        let spec = AlternationSpec::locative(&load);
        let recs = [
            framed(1, "load", "NP-PP_onto"),
            framed(2, "load", "NP-PP_with"),
            framed(3, "load", "NP-PP_at"),
        ];
        let (kept, ledger) = filter_alternation(&recs, &spec, &load).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(ledger.len(), 1);
        let give = verb("give", &["give", "gives", "gave", "given", "giving"]);
        assert!(matches!(
            filter_alternation(&recs, &AlternationSpec::dative(), &give),
            Err(AlternationError::ClassMismatch { .. })
        ));
        assert!(filter_alternation(&recs, &AlternationSpec::dative(), &load).is_err());
    }
}
