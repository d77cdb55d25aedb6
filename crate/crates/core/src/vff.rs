//! Verb frame frequency tables: counting, low-frequency binning,
//! relabeling and per-verb proportions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::frames::{FrameSignature, FramedRecord, INTRANSITIVE};

pub const OTHER: &str = "other";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VffError {
    #[error("frame `{frame}` matches more than one relabel rule ({first} and {second})")]
    OverlappingRules {
        frame: String,
        first: String,
        second: String,
    },
    #[error("duplicate relabel rule `{0}`")]
    DuplicateRule(String),
    #[error("percentile {0} outside (0, 100]")]
    Percentile(f64),
    #[error("cannot bin an empty table")]
    EmptyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub percentile: f64,
    pub threshold: u64,
    pub binned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerbFrameTable {
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub provenance: String,
    pub binning: Option<Binning>,
}

impl VerbFrameTable {
    pub fn new(provenance: &str) -> Self {
        VerbFrameTable {
            provenance: provenance.to_string(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, verb: &str, frame: &str, n: u64) {
        *self
            .counts
            .entry(verb.to_string())
            .or_default()
            .entry(frame.to_string())
            .or_insert(0) += n;
    }

    pub fn get(&self, verb: &str, frame: &str) -> u64 {
        self.counts.get(verb).and_then(|m| m.get(frame)).copied().unwrap_or(0)
    }

    pub fn verb_total(&self, verb: &str) -> u64 {
        self.counts.get(verb).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Corpus-wide count per frame.
    pub fn frame_totals(&self) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        for m in self.counts.values() {
            for (f, c) in m {
                *out.entry(f.as_str()).or_insert(0) += c;
            }
        }
        out
    }

    pub fn verbs(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }
}

pub fn count_frames<'a>(records: impl IntoIterator<Item = &'a FramedRecord>, provenance: &str) -> VerbFrameTable {
    let mut table = VerbFrameTable::new(provenance);
    for r in records {
        table.add(&r.verb, &r.frame, 1);
    }
    table
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of
/// the sorted values at or below it.
pub fn nearest_rank(sorted: &[u64], percentile: f64) -> u64 {
    assert!(!sorted.is_empty());
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Moves every frame whose corpus-wide total falls below the percentile
/// threshold into `other`, verb by verb.
pub fn bin_low_frequency(table: &VerbFrameTable, percentile: f64) -> Result<VerbFrameTable, VffError> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(VffError::Percentile(percentile));
    }
    let totals: BTreeMap<&str, u64> = table.frame_totals().into_iter().filter(|(f, _)| *f != OTHER).collect();
    if totals.is_empty() {
        return Err(VffError::EmptyTable);
    }
    let mut sorted: Vec<u64> = totals.values().copied().collect();
    sorted.sort_unstable();
    let threshold = nearest_rank(&sorted, percentile);
    let binned: BTreeSet<&str> = totals.iter().filter(|(_, &t)| t < threshold).map(|(f, _)| *f).collect();
    let mut out = VerbFrameTable::new(&table.provenance);
    for (verb, frames) in &table.counts {
        for (frame, &c) in frames {
            let target = if binned.contains(frame.as_str()) { OTHER } else { frame };
            out.add(verb, target, c);
        }
    }
    out.binning = Some(Binning {
        percentile,
        threshold,
        binned: binned.into_iter().map(String::from).collect(),
    });
    Ok(out)
}

/// Which frames a relabel rule applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FramePattern {
    Exact(String),
    /// Atom-wise wildcard: `PP_*-PP_*` matches any two-PP frame.
    Glob(String),
    /// Frames made only of PPs (one or more).
    PpOnly,
}

impl FramePattern {
    pub fn matches(&self, frame: &str) -> bool {
        match self {
            FramePattern::Exact(f) => f == frame,
            FramePattern::Glob(g) => {
                let pat: Vec<&str> = g.split('-').collect();
                let atoms: Vec<&str> = frame.split('-').collect();
                pat.len() == atoms.len() && pat.iter().zip(&atoms).all(|(p, a)| wildcard(p, a))
            }
            FramePattern::PpOnly => FrameSignature::parse(frame).is_some_and(|f| f.is_pp_only()),
        }
    }

    fn describe(&self) -> String {
        match self {
            FramePattern::Exact(f) => f.clone(),
            FramePattern::Glob(g) => g.clone(),
            FramePattern::PpOnly => "pp_only".into(),
        }
    }
}

fn wildcard(pattern: &str, s: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == s,
        Some((head, tail)) => {
            if !s.starts_with(head) {
                return false;
            }
            let rest = &s[head.len()..];
            (0..=rest.len())
                .filter(|&i| rest.is_char_boundary(i))
                .any(|i| wildcard(tail, &rest[i..]))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelabelMap {
    pub rules: Vec<(FramePattern, String)>,
}

impl RelabelMap {
    pub fn new(rules: Vec<(FramePattern, String)>) -> Self {
        RelabelMap { rules }
    }

    /// PP-only frames become intransitive, the granularity of norms that
    /// fold prepositional complements into intransitive uses.
    pub fn pp_as_intransitive() -> Self {
        RelabelMap::new(vec![(FramePattern::PpOnly, INTRANSITIVE.to_string())])
    }

    fn target(&self, frame: &str) -> Result<Option<&str>, VffError> {
        let mut hit: Option<usize> = None;
        for (i, (p, _)) in self.rules.iter().enumerate() {
            if p.matches(frame) {
                if let Some(first) = hit {
                    return Err(VffError::OverlappingRules {
                        frame: frame.to_string(),
                        first: self.rules[first].0.describe(),
                        second: p.describe(),
                    });
                }
                hit = Some(i);
            }
        }
        Ok(hit.map(|i| self.rules[i].1.as_str()))
    }
}

pub fn relabel(table: &VerbFrameTable, mapping: &RelabelMap) -> Result<VerbFrameTable, VffError> {
    let mut seen = BTreeSet::new();
    for (p, _) in &mapping.rules {
        if !seen.insert(p.describe()) {
            return Err(VffError::DuplicateRule(p.describe()));
        }
    }
    let mut out = VerbFrameTable {
        provenance: table.provenance.clone(),
        binning: table.binning.clone(),
        ..Default::default()
    };
    for (verb, frames) in &table.counts {
        for (frame, &c) in frames {
            let target = mapping.target(frame)?.unwrap_or(frame);
            out.add(verb, target, c);
        }
    }
    Ok(out)
}

pub type Proportions = BTreeMap<String, BTreeMap<String, f64>>;

/// Per-verb frame fractions. Verbs with a zero total are skipped.
pub fn proportions(table: &VerbFrameTable) -> Proportions {
    let mut out = BTreeMap::new();
    for (verb, frames) in &table.counts {
        let total: u64 = frames.values().sum();
        if total == 0 {
            log::warn!("verb `{verb}` has no counted frames; left out of proportions");
            continue;
        }
        let row = frames
            .iter()
            .map(|(f, &c)| (f.clone(), c as f64 / total as f64))
            .collect();
        out.insert(verb.clone(), row);
    }
    out
}

pub const VFF_HEADER: &str = "verb\tframe\tcount\tproportion\tsource";

/// vff.tsv rows for each table in order; proportions at 6 decimals.
pub fn render_tsv(tables: &[VerbFrameTable]) -> String {
    let mut out = format!("{VFF_HEADER}\n");
    for t in tables {
        let props = proportions(t);
        for (verb, frames) in &t.counts {
            for (frame, c) in frames {
                let p = props.get(verb).and_then(|m| m.get(frame)).copied().unwrap_or(0.0);
                out.push_str(&format!("{verb}\t{frame}\t{c}\t{p:.6}\t{}\n", t.provenance));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, verb: &str, frame: &str) -> FramedRecord {
        FramedRecord {
            sentence_id: id,
            source: "llm".into(),
            verb: verb.into(),
            frame: frame.into(),
        }
    }

    #[test]
    fn counting() {
        let recs = [
            rec(1, "give", "NP-NP"),
            rec(2, "give", "NP-PP_to"),
            rec(3, "give", "NP-NP"),
        ];
        let t = count_frames(&recs, "llm");
        assert_eq!(t.get("give", "NP-NP"), 2);
        assert_eq!(t.get("give", "NP-PP_to"), 1);
        assert_eq!(t.total(), 3);
        assert!(count_frames(&[], "llm").is_empty());
    }

    #[test]
    fn nearest_rank_threshold() {
        assert_eq!(nearest_rank(&[1, 2, 3, 100], 75.0), 3);
        assert_eq!(nearest_rank(&[1, 2, 3, 100], 100.0), 100);
        assert_eq!(nearest_rank(&[1, 2, 3, 100], 1.0), 1);
        assert_eq!(nearest_rank(&[7], 50.0), 7);
    }

    #[test]
    fn binning_moves_rare_frames() {
        let mut t = VerbFrameTable::new("llm");
        t.add("a", "F1", 1);
        t.add("b", "F2", 2);
        t.add("a", "F3", 3);
        t.add("b", "NP", 60);
        t.add("a", "NP", 40);
        let b = bin_low_frequency(&t, 75.0).unwrap();
        let meta = b.binning.as_ref().unwrap();
        assert_eq!(meta.threshold, 3);
        assert_eq!(meta.binned, ["F1", "F2"]);
        assert_eq!(b.get("a", OTHER), 1);
        assert_eq!(b.get("b", OTHER), 2);
        assert_eq!(b.get("a", "F3"), 3);
        assert_eq!(b.total(), t.total());
        assert!(bin_low_frequency(&VerbFrameTable::new("x"), 75.0).is_err());
        assert!(bin_low_frequency(&t, 0.0).is_err());
    }

    #[test]
    fn binning_without_rare_frames_only_adds_metadata() {
        let mut t = VerbFrameTable::new("llm");
        t.add("a", "NP", 5);
        t.add("b", "NP", 5);
        let b = bin_low_frequency(&t, 75.0).unwrap();
        assert_eq!(b.counts, t.counts);
        assert!(b.binning.unwrap().binned.is_empty());
    }

    #[test]
    fn relabel_pp_into_intransitive() {
        let mut t = VerbFrameTable::new("llm");
        t.add("look", "PP_for", 10);
        t.add("look", "intransitive", 5);
        let map = RelabelMap::new(vec![
            (FramePattern::Glob("PP_*".into()), INTRANSITIVE.into()),
            (FramePattern::Glob("PP_*-PP_*".into()), INTRANSITIVE.into()),
        ]);
        let r = relabel(&t, &map).unwrap();
        assert_eq!(r.counts["look"].len(), 1);
        assert_eq!(r.get("look", INTRANSITIVE), 15);
        let r2 = relabel(&t, &RelabelMap::pp_as_intransitive()).unwrap();
        assert_eq!(r2.counts, r.counts);
    }

    #[test]
    fn relabel_identities_and_overlap() {
        let mut t = VerbFrameTable::new("llm");
        t.add("eat", "NP", 4);
        t.add("eat", "NP-PP_with", 1);
        assert_eq!(relabel(&t, &RelabelMap::default()).unwrap().counts, t.counts);
        let id = RelabelMap::new(vec![(FramePattern::Exact("NP".into()), "NP".into())]);
        assert_eq!(relabel(&t, &id).unwrap().counts, t.counts);
        let overlap = RelabelMap::new(vec![
            (FramePattern::Glob("NP-*".into()), "x".into()),
            (FramePattern::Exact("NP-PP_with".into()), "y".into()),
        ]);
        assert!(matches!(relabel(&t, &overlap), Err(VffError::OverlappingRules { .. })));
    }

    #[test]
    fn wildcard_matching() {
        assert!(wildcard("PP_*", "PP_to"));
        assert!(!wildcard("PP_*", "NP"));
        assert!(wildcard("*", ""));
        assert!(wildcard("P*_t*", "PP_to"));
        assert!(!FramePattern::Glob("PP_*".into()).matches("PP_to-PP_for"));
        assert!(FramePattern::PpOnly.matches("PP_to-PP_for"));
        assert!(!FramePattern::PpOnly.matches("intransitive"));
        assert!(!FramePattern::PpOnly.matches(OTHER));
    }

    #[test]
    fn proportion_rows() {
        let mut t = VerbFrameTable::new("llm");
        t.add("give", "NP-NP", 2);
        t.add("give", "NP-PP_to", 2);
        t.add("sleep", "intransitive", 3);
        t.add("ghost", "NP", 0);
        let p = proportions(&t);
        assert_eq!(p["give"]["NP-NP"], 0.5);
        assert_eq!(p["give"]["NP-PP_to"], 0.5);
        assert_eq!(p["sleep"]["intransitive"], 1.0);
        assert!(!p.contains_key("ghost"));
    }

    #[test]
    fn tsv_layout() {
        let mut t = VerbFrameTable::new("llm");
        t.add("give", "NP-NP", 1);
        t.add("give", "NP", 3);
        assert_eq!(
            render_tsv(&[t]),
            "verb\tframe\tcount\tproportion\tsource\ngive\tNP\t3\t0.750000\tllm\ngive\tNP-NP\t1\t0.250000\tllm\n"
        );
    }
}
