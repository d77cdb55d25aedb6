//! Verb frame frequency (VFF) estimation.
//!
//! The crate covers the whole chain from a verb lexicon to evaluation
//! reports: sentence corpora ([`corpus`]), prompt construction and
//! LLM backends ([`gateway`]), bracketed constituency trees ([`treebank`]),
//! frame signatures ([`frames`]), exclusion rules ([`cleaning`]), frame
//! counting ([`vff`]), the statistics kernel ([`stats`]) and the comparison
//! suites against published norms ([`eval`]). [`pipeline`] wires the stages
//! together for the command-line front end.

pub mod cleaning;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod frames;
pub mod gateway;
pub mod jsonl;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod text;
pub mod treebank;
pub mod vff;

pub use corpus::{ContextEntry, SentenceRecord, VerbEntry};
pub use frames::{ArgumentAnnotation, FrameSignature, PhraseTag};
pub use stats::{BayesComparison, RegressionResult};
pub use vff::VerbFrameTable;
