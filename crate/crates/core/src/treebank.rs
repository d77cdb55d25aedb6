//! Penn-Treebank-style bracketed constituency trees.
//!
//! `(S (NP (PRP I)) (VP (VBD slept)))` parses into a [`TreeNode`] whose
//! preterminals carry the surface token. Functional suffixes and indices
//! (`NP-SBJ-1`, `PP-LOC=2`) are stripped to the base label while loading;
//! labels that start with `-` (`-LRB-`, `-NONE-`) are kept whole.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {offset}")]
pub struct TreeError {
    pub kind: TreeErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeErrorKind {
    EmptyInput,
    Unbalanced,
    EmptyLabel,
    ExpectedOpen,
    EmptyNode,
    TrailingInput,
}

impl fmt::Display for TreeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeErrorKind::EmptyInput => "empty input",
            TreeErrorKind::Unbalanced => "unbalanced brackets",
            TreeErrorKind::EmptyLabel => "empty label",
            TreeErrorKind::ExpectedOpen => "expected `(`",
            TreeErrorKind::EmptyNode => "node has neither token nor children",
            TreeErrorKind::TrailingInput => "trailing input after tree",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Content {
    Token(String),
    Children(Vec<TreeNode>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub label: String,
    pub content: Content,
}

impl TreeNode {
    pub fn leaf(label: &str, token: &str) -> Self {
        TreeNode {
            label: label.to_string(),
            content: Content::Token(token.to_string()),
        }
    }

    pub fn branch(label: &str, children: Vec<TreeNode>) -> Self {
        TreeNode {
            label: label.to_string(),
            content: Content::Children(children),
        }
    }

    pub fn token(&self) -> Option<&str> {
        match &self.content {
            Content::Token(t) => Some(t),
            Content::Children(_) => None,
        }
    }

    pub fn children(&self) -> &[TreeNode] {
        match &self.content {
            Content::Token(_) => &[],
            Content::Children(c) => c,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.content, Content::Token(_))
    }

    /// Leaf tokens left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.content {
            Content::Token(t) => out.push(t),
            Content::Children(c) => c.iter().for_each(|n| n.collect_leaves(out)),
        }
    }

    /// Space-joined leaf yield.
    pub fn yield_text(&self) -> String {
        self.leaves().join(" ")
    }
}

impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.label)?;
        match &self.content {
            Content::Token(t) => write!(f, " {t}")?,
            Content::Children(c) => {
                for child in c {
                    write!(f, " {child}")?;
                }
            }
        }
        f.write_str(")")
    }
}

/// Which external parser produced a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSource {
    Berkeley,
    Stanford,
    Other,
}

impl TreeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            TreeSource::Berkeley => "berkeley",
            TreeSource::Stanford => "stanford",
            TreeSource::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub sentence_id: u64,
    pub tree: TreeNode,
    pub source: TreeSource,
}

/// One line of a trees file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLine {
    pub sentence_id: u64,
    pub source: TreeSource,
    pub tree: String,
}

pub const TREES_SCHEMA: &str = "vff.trees";

impl TreeLine {
    pub fn parse(&self) -> Result<ParsedSentence, TreeError> {
        Ok(ParsedSentence {
            sentence_id: self.sentence_id,
            tree: parse_tree(&self.tree)?,
            source: self.source.clone(),
        })
    }
}

/// Drops functional tags and co-indices: `NP-SBJ-1` -> `NP`.
pub fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(0) | None => label,
        Some(i) => &label[..i],
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn err(&self, kind: TreeErrorKind) -> TreeError {
        TreeError { kind, offset: self.pos }
    }

    /// Reads a run of characters that are neither whitespace nor brackets.
    fn atom(&mut self) -> &'a str {
        let rest = &self.src[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn node(&mut self) -> Result<TreeNode, TreeError> {
        self.skip_ws();
        if self.peek() != Some('(') {
            return Err(self.err(if self.peek().is_none() {
                TreeErrorKind::Unbalanced
            } else {
                TreeErrorKind::ExpectedOpen
            }));
        }
        let open = self.pos;
        self.pos += 1;
        self.skip_ws();
        let label = self.atom();
        if label.is_empty() {
            return Err(if self.peek().is_none() {
                self.err(TreeErrorKind::Unbalanced)
            } else {
                TreeError {
                    kind: TreeErrorKind::EmptyLabel,
                    offset: open,
                }
            });
        }
        let label = base_label(label).to_string();
        self.skip_ws();
        let content = match self.peek() {
            None => return Err(self.err(TreeErrorKind::Unbalanced)),
            Some(')') => {
                return Err(TreeError {
                    kind: TreeErrorKind::EmptyNode,
                    offset: open,
                })
            }
            Some('(') => {
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some('(') => children.push(self.node()?),
                        Some(')') => break,
                        None => return Err(self.err(TreeErrorKind::Unbalanced)),
                        Some(_) => return Err(self.err(TreeErrorKind::ExpectedOpen)),
                    }
                }
                Content::Children(children)
            }
            Some(_) => {
                let token = self.atom().to_string();
                Content::Token(token)
            }
        };
        self.skip_ws();
        match self.peek() {
            Some(')') => {
                self.pos += 1;
                Ok(TreeNode { label, content })
            }
            None => Err(self.err(TreeErrorKind::Unbalanced)),
            Some(_) => Err(self.err(TreeErrorKind::Unbalanced)),
        }
    }
}

pub fn parse_tree(text: &str) -> Result<TreeNode, TreeError> {
    let mut cur = Cursor { src: text, pos: 0 };
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(cur.err(TreeErrorKind::EmptyInput));
    }
    let tree = cur.node()?;
    cur.skip_ws();
    if cur.peek().is_some() {
        return Err(cur.err(TreeErrorKind::TrailingInput));
    }
    Ok(tree)
}

/// Single-line canonical form with one space between items.
pub fn serialize_tree(tree: &TreeNode) -> String {
    tree.to_string()
}

/// Labels made only of punctuation (`,`, `.`, `:`, ``` `` ```, `-LRB-`).
pub fn is_punctuation_label(label: &str) -> bool {
    matches!(label, "-LRB-" | "-RRB-" | "-LCB-" | "-RCB-" | "-NONE-") || label.chars().all(|c| !c.is_alphanumeric())
}
