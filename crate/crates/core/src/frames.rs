//! Subcategorization frames.
//!
//! A frame is the ordered list of a verb's selected argument phrases. Two
//! annotators feed it: bracketed argument lists of the form
//! `[me]_NP [a cake]_NP` and constituency trees. Prepositional phrases are
//! sublabeled by their head preposition, so `[to the wrong address]_PP`
//! contributes the atom `PP_to`. The canonical string joins atoms with `-`;
//! the empty list renders as `intransitive`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::VerbEntry;
use crate::text;
use crate::treebank::{is_punctuation_label, ParsedSentence, TreeNode};

pub const INTRANSITIVE: &str = "intransitive";
pub const NOT_A_VERB: &str = "NA";

/// Clause- and phrase-level Penn Treebank tags accepted for arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhraseTag {
    S,
    Sbar,
    Adjp,
    Advp,
    Np,
    Pp,
    Prt,
    Qp,
    Vp,
    Whadjp,
    Whavp,
    Whnp,
    Whpp,
}

impl PhraseTag {
    pub const ALL: [PhraseTag; 13] = [
        PhraseTag::S,
        PhraseTag::Sbar,
        PhraseTag::Adjp,
        PhraseTag::Advp,
        PhraseTag::Np,
        PhraseTag::Pp,
        PhraseTag::Prt,
        PhraseTag::Qp,
        PhraseTag::Vp,
        PhraseTag::Whadjp,
        PhraseTag::Whavp,
        PhraseTag::Whnp,
        PhraseTag::Whpp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhraseTag::S => "S",
            PhraseTag::Sbar => "SBAR",
            PhraseTag::Adjp => "ADJP",
            PhraseTag::Advp => "ADVP",
            PhraseTag::Np => "NP",
            PhraseTag::Pp => "PP",
            PhraseTag::Prt => "PRT",
            PhraseTag::Qp => "QP",
            PhraseTag::Vp => "VP",
            PhraseTag::Whadjp => "WHADJP",
            PhraseTag::Whavp => "WHAVP",
            PhraseTag::Whnp => "WHNP",
            PhraseTag::Whpp => "WHPP",
        }
    }
}

impl fmt::Display for PhraseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhraseTag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        PhraseTag::ALL.into_iter().find(|t| t.as_str() == s).ok_or(())
    }
}

impl Serialize for PhraseTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PhraseTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|_| serde::de::Error::custom(format!("unknown phrase tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("empty annotation")]
    Empty,
    #[error("malformed annotation: `{0}` is not a bracketed argument")]
    Unbracketed(String),
    #[error("malformed annotation: unknown tag in `{0}`")]
    UnknownTag(String),
    #[error("malformed annotation: empty span in `{0}`")]
    EmptySpan(String),
    #[error("malformed annotation: PP `{0}` has no head preposition")]
    NoPreposition(String),
    #[error("a not-a-verb annotation has no frame")]
    NotAVerb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub span: String,
    pub tag: PhraseTag,
}

impl Argument {
    pub fn new(span: &str, tag: PhraseTag) -> Self {
        Argument {
            span: span.to_string(),
            tag,
        }
    }
}

/// What an annotator said about one verb occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arguments {
    Args(Vec<Argument>),
    Intransitive,
    NotAVerb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Args,
    Intransitive,
    NotAVerb,
}

impl Arguments {
    pub fn kind(&self) -> AnnotationKind {
        match self {
            Arguments::Args(_) => AnnotationKind::Args,
            Arguments::Intransitive => AnnotationKind::Intransitive,
            Arguments::NotAVerb => AnnotationKind::NotAVerb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AnnotationLine", into = "AnnotationLine")]
pub struct ArgumentAnnotation {
    pub sentence_id: u64,
    pub source: String,
    pub arguments: Arguments,
}

pub const ANNOTATIONS_SCHEMA: &str = "vff.annotations";

/// Wire layout of one annotations.jsonl line.
#[derive(Serialize, Deserialize)]
struct AnnotationLine {
    sentence_id: u64,
    source: String,
    kind: AnnotationKind,
    #[serde(default)]
    args: Vec<Argument>,
}

impl TryFrom<AnnotationLine> for ArgumentAnnotation {
    type Error = String;

    fn try_from(l: AnnotationLine) -> Result<Self, String> {
        let arguments = match l.kind {
            AnnotationKind::Args => {
                if l.args.is_empty() {
                    return Err("kind `args` requires at least one argument".into());
                }
                if l.args.iter().any(|a| a.span.trim().is_empty()) {
                    return Err("argument span is empty".into());
                }
                Arguments::Args(l.args)
            }
            AnnotationKind::Intransitive | AnnotationKind::NotAVerb if !l.args.is_empty() => {
                return Err(format!("kind `{:?}` must not carry arguments", l.kind));
            }
            AnnotationKind::Intransitive => Arguments::Intransitive,
            AnnotationKind::NotAVerb => Arguments::NotAVerb,
        };
        Ok(ArgumentAnnotation {
            sentence_id: l.sentence_id,
            source: l.source,
            arguments,
        })
    }
}

impl From<ArgumentAnnotation> for AnnotationLine {
    fn from(a: ArgumentAnnotation) -> Self {
        let kind = a.arguments.kind();
        let args = match a.arguments {
            Arguments::Args(v) => v,
            _ => Vec::new(),
        };
        AnnotationLine {
            sentence_id: a.sentence_id,
            source: a.source,
            kind,
            args,
        }
    }
}

/// Parses `NA`, `[intransitive]` or a sequence of `[span]_TAG` tokens.
pub fn parse_argument_annotation(text: &str) -> Result<Arguments, AnnotationError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(AnnotationError::Empty);
    }
    if text == NOT_A_VERB {
        return Ok(Arguments::NotAVerb);
    }
    if text == "[intransitive]" {
        return Ok(Arguments::Intransitive);
    }
    let mut args = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        if !rest.starts_with('[') {
            return Err(AnnotationError::Unbracketed(first_word(rest).to_string()));
        }
        let close = match (rest.find(']'), rest.find("]_")) {
            (Some(a), Some(b)) if a == b => b,
            _ => return Err(AnnotationError::Unbracketed(first_word(rest).to_string())),
        };
        let span = rest[1..close].trim();
        let after = &rest[close + 2..];
        let tag_len = after.find(char::is_whitespace).unwrap_or(after.len());
        let tag_str = &after[..tag_len];
        let full = &rest[..close + 2 + tag_len];
        let tag: PhraseTag = tag_str
            .parse()
            .map_err(|_| AnnotationError::UnknownTag(full.to_string()))?;
        if span.is_empty() {
            return Err(AnnotationError::EmptySpan(full.to_string()));
        }
        args.push(Argument::new(span, tag));
        rest = after[tag_len..].trim_start();
    }
    Ok(Arguments::Args(args))
}

fn token_extent(s: &str) -> usize {
    s.find(char::is_whitespace).unwrap_or(s.len())
}

fn first_word(s: &str) -> &str {
    &s[..token_extent(s)]
}

/// Parses the `arguments` list of a gateway response item.
pub fn parse_argument_list(items: &[String]) -> Result<Arguments, AnnotationError> {
    match items {
        [] => Err(AnnotationError::Empty),
        [single] if single.trim() == NOT_A_VERB || single.trim() == "[intransitive]" => {
            parse_argument_annotation(single)
        }
        _ => {
            let mut args = Vec::new();
            for item in items {
                match parse_argument_annotation(item)? {
                    Arguments::Args(mut a) => args.append(&mut a),
                    _ => return Err(AnnotationError::Unbracketed(item.clone())),
                }
            }
            Ok(Arguments::Args(args))
        }
    }
}

/// One frame atom: a phrase tag, with a preposition for PPs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub tag: PhraseTag,
    pub prep: Option<String>,
}

impl Atom {
    pub fn plain(tag: PhraseTag) -> Self {
        Atom { tag, prep: None }
    }

    pub fn pp(prep: &str) -> Self {
        Atom {
            tag: PhraseTag::Pp,
            prep: Some(sanitize_prep(prep)),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.prep {
            Some(p) => write!(f, "{}_{p}", self.tag),
            None => write!(f, "{}", self.tag),
        }
    }
}

/// `-` separates atoms in the canonical string, so it cannot occur inside
/// a preposition sublabel.
fn sanitize_prep(p: &str) -> String {
    p.to_lowercase().replace('-', "_")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FrameSignature {
    pub atoms: Vec<Atom>,
}

impl FrameSignature {
    pub fn intransitive() -> Self {
        FrameSignature::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        FrameSignature { atoms }
    }

    pub fn is_intransitive(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Parses a canonical string. Fails for labels that are not frames,
    /// such as `other`.
    pub fn parse(s: &str) -> Option<Self> {
        if s == INTRANSITIVE {
            return Some(FrameSignature::intransitive());
        }
        let mut atoms = Vec::new();
        for part in s.split('-') {
            let (tag, prep) = match part.split_once('_') {
                Some((t, p)) => (t, Some(p)),
                None => (part, None),
            };
            let tag: PhraseTag = tag.parse().ok()?;
            match (tag, prep) {
                (PhraseTag::Pp, Some(p)) if !p.is_empty() && p == p.to_lowercase() => atoms.push(Atom::pp(p)),
                (PhraseTag::Pp, None) => atoms.push(Atom::plain(PhraseTag::Pp)),
                (t, None) => atoms.push(Atom::plain(t)),
                _ => return None,
            }
        }
        Some(FrameSignature { atoms })
    }

    /// Drops PP sublabels: `NP-PP_to` becomes `NP-PP`.
    pub fn coarse(&self) -> FrameSignature {
        FrameSignature {
            atoms: self.atoms.iter().map(|a| Atom::plain(a.tag)).collect(),
        }
    }

    pub fn tags(&self) -> Vec<PhraseTag> {
        self.atoms.iter().map(|a| a.tag).collect()
    }

    /// True when every atom is a PP (and there is at least one).
    pub fn is_pp_only(&self) -> bool {
        !self.atoms.is_empty() && self.atoms.iter().all(|a| a.tag == PhraseTag::Pp)
    }
}

impl fmt::Display for FrameSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str(INTRANSITIVE);
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Coarse label of a canonical frame string; non-frame labels pass through.
pub fn coarse_label(frame: &str) -> String {
    FrameSignature::parse(frame)
        .map(|f| f.coarse().to_string())
        .unwrap_or_else(|| frame.to_string())
}

pub fn frame_from_arguments(arguments: &Arguments) -> Result<FrameSignature, AnnotationError> {
    match arguments {
        Arguments::NotAVerb => Err(AnnotationError::NotAVerb),
        Arguments::Intransitive => Ok(FrameSignature::intransitive()),
        Arguments::Args(args) => args
            .iter()
            .map(|a| match a.tag {
                PhraseTag::Pp => {
                    let head = a.span.split_whitespace().next().map(text::word).unwrap_or_default();
                    if head.is_empty() {
                        Err(AnnotationError::NoPreposition(a.span.clone()))
                    } else {
                        Ok(Atom::pp(&head))
                    }
                }
                tag => Ok(Atom::plain(tag)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(FrameSignature::new),
    }
}

/// Result of reading a frame off a constituency tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeFrame {
    Frame(FrameSignature),
    NotAVerb,
    NotFound,
}

const VERBAL_POS: [&str; 6] = ["VB", "VBD", "VBG", "VBN", "VBP", "VBZ"];

/// Frame of the leftmost verbal occurrence of `verb` in the tree.
///
/// The frame is the sequence of phrase-level children of the verb's
/// minimal dominating VP that follow the verb, punctuation skipped. No
/// argument/adjunct distinction is made.
pub fn frame_from_tree(parsed: &ParsedSentence, verb: &VerbEntry) -> TreeFrame {
    let mut leaves = Vec::new();
    leaf_paths(&parsed.tree, &mut Vec::new(), &mut leaves);
    let mut seen_nominal = false;
    let mut found = None;
    for (path, node) in &leaves {
        let token = node.token().map(text::word).unwrap_or_default();
        if !verb.has_form(&token) {
            continue;
        }
        if VERBAL_POS.contains(&node.label.as_str()) {
            found = Some(path.clone());
            break;
        }
        seen_nominal = true;
    }
    let Some(path) = found else {
        return if seen_nominal {
            TreeFrame::NotAVerb
        } else {
            TreeFrame::NotFound
        };
    };

    // ancestors[i] is the node reached after following path[..i]
    let mut ancestors: Vec<&TreeNode> = vec![&parsed.tree];
    for &i in &path {
        let next = &ancestors.last().unwrap().children()[i];
        ancestors.push(next);
    }
    ancestors.pop(); // the verb leaf itself
    if ancestors.is_empty() {
        return TreeFrame::Frame(FrameSignature::intransitive());
    }
    let depth = ancestors
        .iter()
        .rposition(|n| n.label == "VP")
        .unwrap_or(ancestors.len() - 1);
    let head = ancestors[depth];
    let after = path[depth];
    let atoms = head.children()[after + 1..]
        .iter()
        .filter(|c| !is_punctuation_label(&c.label))
        .filter_map(|c| {
            let tag: PhraseTag = c.label.parse().ok()?;
            Some(match tag {
                PhraseTag::Pp => match pp_head(c) {
                    Some(p) => Atom::pp(&p),
                    None => Atom::plain(PhraseTag::Pp),
                },
                t => Atom::plain(t),
            })
        })
        .collect();
    TreeFrame::Frame(FrameSignature::new(atoms))
}

fn leaf_paths<'a>(node: &'a TreeNode, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a TreeNode)>) {
    if node.is_leaf() {
        out.push((path.clone(), node));
        return;
    }
    for (i, c) in node.children().iter().enumerate() {
        path.push(i);
        leaf_paths(c, path, out);
        path.pop();
    }
}

/// First IN/TO leaf inside a PP, falling back to its first leaf.
fn pp_head(pp: &TreeNode) -> Option<String> {
    fn find(n: &TreeNode) -> Option<&TreeNode> {
        if n.is_leaf() {
            return matches!(n.label.as_str(), "IN" | "TO").then_some(n);
        }
        n.children().iter().find_map(find)
    }
    let leaf = find(pp)
        .and_then(|n| n.token())
        .or_else(|| pp.leaves().first().copied())?;
    let w = text::word(leaf);
    (!w.is_empty()).then_some(w)
}

/// A sentence with its verb and the frame one annotator assigned.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FramedRecord {
    pub sentence_id: u64,
    pub source: String,
    pub verb: String,
    pub frame: String,
}

pub const FRAMES_SCHEMA: &str = "vff.frames";
