//! Stage runner behind the command-line front end.
//!
//! Each command reads its inputs from configured paths or from the output
//! directory and writes its outputs there. Inputs and outputs are recorded
//! with their digests in `manifest.json`. `all` runs the same commands in
//! sequence, so its outputs match running the steps one at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cleaning::{
    apply_exclusions, to_framed, AnnotatedRecord, Annotation, CleaningRules, ExclusionLedger, ExclusionRule,
    LedgerEntry, LEDGER_SCHEMA,
};
use crate::config::{BackendKind, ConfigError, PipelineConfig};
use crate::corpus::{
    load_contexts, load_irregulars, load_sentences, load_verbs, store_corpus, CorpusError, CorpusRecords, Lexicon,
    SentenceRecord, VerbEntry,
};
use crate::eval::{load_gold, run_suite, EvalError, EvalReport, GoldKind, GoldTable, SuiteInput};
use crate::frames::{
    frame_from_tree, ArgumentAnnotation, Arguments, FramedRecord, TreeFrame, ANNOTATIONS_SCHEMA, FRAMES_SCHEMA,
};
use crate::gateway::{
    load_transcript, render_transcript, run_generation, run_parsing, Backend, Exchange, GatewayError, LiveBackend,
    MockBackend, RejectReason, TranscriptBackend, TranscriptEntry,
};
use crate::jsonl::{self, JsonlError};
use crate::report::{self, num, SourceSummary};
use crate::treebank::{TreeLine, TREES_SCHEMA};
use crate::vff::{bin_low_frequency, count_frames, render_tsv, Binning, VerbFrameTable};

pub const LLM_SOURCE: &str = "llm";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MISSING_SCHEMA: &str = "vff.gateway_missing";
pub const TREE_ANNOTATIONS_SCHEMA: &str = "vff.tree_annotations";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Generate,
    ParseLlm,
    IngestTrees,
    Clean,
    Count,
    Evaluate,
    Report,
    All,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::ParseLlm => "parse-llm",
            Command::IngestTrees => "ingest-trees",
            Command::Clean => "clean",
            Command::Count => "count",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
            Command::All => "all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            Command::Generate,
            Command::ParseLlm,
            Command::IngestTrees,
            Command::Clean,
            Command::Count,
            Command::Evaluate,
            Command::Report,
            Command::All,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl PipelineError {
    /// Machine-readable class printed on failure.
    pub fn class(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config_error",
            PipelineError::Data(_) => "data_error",
            PipelineError::Backend(_) => "backend_error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Backend(_) => 3,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<JsonlError> for PipelineError {
    fn from(e: JsonlError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Backend { .. } => PipelineError::Backend(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

fn data(msg: impl Into<String>) -> PipelineError {
    PipelineError::Data(msg.into())
}

fn config(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub settings: BTreeMap<String, String>,
    pub commands: BTreeMap<String, CommandRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files touched by one command, in the order they were touched.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Io {
    fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|q| q == p) {
            self.inputs.push(p.to_path_buf());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct MissingLine {
    sentence_id: u64,
    reason: RejectReason,
    detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TreeOutcome {
    Frame,
    NotAVerb,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TreeAnnotationLine {
    sentence_id: u64,
    source: String,
    outcome: TreeOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame: Option<String>,
}

impl TreeAnnotationLine {
    fn to_tree_frame(&self) -> Result<TreeFrame, String> {
        Ok(match (self.outcome, &self.frame) {
            (TreeOutcome::Frame, Some(f)) => TreeFrame::Frame(
                crate::frames::FrameSignature::parse(f).ok_or_else(|| format!("`{f}` is not a frame"))?,
            ),
            (TreeOutcome::Frame, None) => return Err("outcome `frame` without a frame".into()),
            (TreeOutcome::NotAVerb, _) => TreeFrame::NotAVerb,
            (TreeOutcome::NotFound, _) => TreeFrame::NotFound,
        })
    }
}

fn write_file(path: &Path, bytes: &[u8], io: &mut Io) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))?;
    io.outputs.push(path.to_path_buf());
    Ok(())
}

fn file_name_part(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub struct Pipeline {
    cfg: PipelineConfig,
    config_sha256: String,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, config_sha256: String) -> Self {
        Pipeline { cfg, config_sha256 }
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let bytes = fs::read(path).map_err(|e| config(format!("{}: cannot read config: {e}", path.display())))?;
        let cfg = PipelineConfig::load(path)?;
        Ok(Pipeline::new(cfg, sha256_hex(&bytes)))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut PipelineConfig {
        &mut self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.paths.out
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.out.join(name)
    }

    /// The steps `all` expands to under the current configuration.
    pub fn plan(&self, command: Command) -> Vec<Command> {
        if command != Command::All {
            return vec![command];
        }
        let mut steps = Vec::new();
        if self.cfg.paths.sentences.is_none() {
            steps.push(Command::Generate);
        }
        if self.cfg.paths.annotations.is_none() {
            steps.push(Command::ParseLlm);
        }
        if self.cfg.paths.trees.is_some() {
            steps.push(Command::IngestTrees);
        }
        steps.extend([Command::Clean, Command::Count]);
        if self.cfg.gold.any() {
            steps.push(Command::Evaluate);
        }
        steps.push(Command::Report);
        steps
    }

    /// Runs `command` (or every step of `all`) and returns the steps run.
    pub fn run(&self, command: Command) -> Result<Vec<Command>, PipelineError> {
        if self.cfg.backend.kind == BackendKind::Transcript && self.cfg.backend.transcript.is_none() {
            return Err(config("backend transcript needs backend.transcript in the config"));
        }
        let steps = self.plan(command);
        for &step in &steps {
            log::info!("running {step}");
            let mut io = Io::default();
            match step {
                Command::Generate => self.generate(&mut io)?,
                Command::ParseLlm => self.parse_llm(&mut io)?,
                Command::IngestTrees => self.ingest_trees(&mut io)?,
                Command::Clean => self.clean(&mut io)?,
                Command::Count => self.count(&mut io)?,
                Command::Evaluate => self.evaluate(&mut io)?,
                Command::Report => self.report(&mut io)?,
                Command::All => unreachable!("plan expands all"),
            }
            self.record_manifest(step, &io)?;
        }
        Ok(steps)
    }

    fn display_path(&self, p: &Path) -> String {
        let join = |rel: &Path| {
            rel.components()
                .filter_map(|c| match c {
                    Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
                    _ => None,
                })
                .collect::<Vec<_>>()
                .join("/")
        };
        if let Ok(rel) = p.strip_prefix(&self.cfg.paths.out) {
            format!("$out/{}", join(rel))
        } else if let Ok(rel) = p.strip_prefix(&self.cfg.base_dir) {
            join(rel)
        } else {
            p.display().to_string()
        }
    }

    fn settings(&self) -> BTreeMap<String, String> {
        let b = &self.cfg.backend;
        let kind = match b.kind {
            BackendKind::Live => "live",
            BackendKind::Transcript => "transcript",
            BackendKind::Mock => "mock",
        };
        BTreeMap::from([
            ("backend".to_string(), kind.to_string()),
            ("seed".to_string(), b.seed.to_string()),
            ("model_generate".to_string(), b.driver.model_generate.clone()),
            ("model_parse".to_string(), b.driver.model_parse.clone()),
        ])
    }

    fn record_manifest(&self, step: Command, io: &Io) -> Result<(), PipelineError> {
        let path = self.out(MANIFEST_FILE);
        let settings = self.settings();
        let mut manifest = fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
            .filter(|m| m.config_sha256 == self.config_sha256 && m.settings == settings)
            .unwrap_or_else(|| Manifest {
                config_sha256: self.config_sha256.clone(),
                settings,
                commands: BTreeMap::new(),
            });
        let digest = |p: &PathBuf| -> Result<FileDigest, PipelineError> {
            let bytes = fs::read(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
            Ok(FileDigest {
                path: self.display_path(p),
                sha256: sha256_hex(&bytes),
            })
        };
        let record = CommandRecord {
            inputs: io.inputs.iter().map(digest).collect::<Result<_, _>>()?,
            outputs: io.outputs.iter().map(digest).collect::<Result<_, _>>()?,
        };
        manifest.commands.insert(step.as_str().to_string(), record);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::create_dir_all(self.out_dir()).map_err(|e| data(format!("{}: {e}", self.out_dir().display())))?;
        fs::write(&path, text).map_err(|e| data(format!("{}: {e}", path.display())))
    }

    /// Verbs in file order with irregular overrides applied, plus the lexicon.
    fn lexicon(&self, io: &mut Io) -> Result<(Vec<VerbEntry>, Lexicon), PipelineError> {
        let path = self
            .cfg
            .paths
            .verbs
            .as_deref()
            .ok_or_else(|| config("paths.verbs is not set"))?;
        io.input(path);
        let verbs = load_verbs(path)?;
        let mut lex = Lexicon::new(verbs.clone());
        if let Some(irr) = &self.cfg.paths.irregulars {
            io.input(irr);
            lex.apply_overrides(&load_irregulars(irr)?)
                .map_err(|e| data(format!("{}: {e}", irr.display())))?;
        }
        let ordered = verbs
            .iter()
            .map(|v| lex.get(&v.lemma).expect("lexicon built from these verbs").clone())
            .collect();
        Ok((ordered, lex))
    }

    fn sentences_path(&self) -> PathBuf {
        self.cfg
            .paths
            .sentences
            .clone()
            .unwrap_or_else(|| self.out("sentences.jsonl"))
    }

    fn sentences(&self, io: &mut Io, lex: &Lexicon) -> Result<Vec<SentenceRecord>, PipelineError> {
        let path = self.sentences_path();
        if !path.exists() {
            return Err(config(format!(
                "no sentence corpus at {}; set paths.sentences or run generate",
                path.display()
            )));
        }
        io.input(&path);
        let s = load_sentences(&path)?;
        lex.check_references(&s)?;
        Ok(s)
    }

    fn backend(&self, lex: &Lexicon) -> Result<Box<dyn Backend>, PipelineError> {
        let b = &self.cfg.backend;
        Ok(match b.kind {
            BackendKind::Mock => Box::new(MockBackend::new(lex.iter().cloned(), b.seed)),
            BackendKind::Transcript => {
                let path = b
                    .transcript
                    .as_deref()
                    .ok_or_else(|| config("backend.transcript is not set"))?;
                let entries = load_transcript(path)?;
                Box::new(TranscriptBackend::new(entries).map_err(|e| data(format!("{}: {e}", path.display())))?)
            }
            BackendKind::Live => Box::new(
                LiveBackend::from_env(&b.endpoint, &b.api_key_env, Duration::from_secs(b.timeout_secs))
                    .map_err(|e| config(e.to_string()))?,
            ),
        })
    }

    /// Adds new exchanges to `transcript.jsonl` when recording is on.
    fn record_transcript(&self, exchanges: &[Exchange], io: &mut Io) -> Result<(), PipelineError> {
        if !self.cfg.backend.record {
            return Ok(());
        }
        let path = self.out("transcript.jsonl");
        let mut entries: Vec<TranscriptEntry> = if path.exists() {
            load_transcript(&path)?
        } else {
            Vec::new()
        };
        let mut seen: BTreeSet<String> = entries.iter().map(|e| e.digest.clone()).collect();
        for e in Exchange::to_transcript(exchanges) {
            if seen.insert(e.digest.clone()) {
                entries.push(e);
            }
        }
        write_file(&path, render_transcript(&entries).as_bytes(), io)
    }

    fn generate(&self, io: &mut Io) -> Result<(), PipelineError> {
        let (verbs, lex) = self.lexicon(io)?;
        let ctx_path = self
            .cfg
            .paths
            .contexts
            .as_deref()
            .ok_or_else(|| config("generate needs paths.contexts"))?;
        io.input(ctx_path);
        let contexts = load_contexts(ctx_path)?;
        if self.cfg.paths.sentences.is_some() {
            log::warn!("paths.sentences is set; later steps will read it instead of the generated corpus");
        }
        let backend = self.backend(&lex)?;
        let outcome = run_generation(&contexts, &verbs, backend.as_ref(), &self.cfg.backend.driver)?;
        if outcome.sentences.is_empty() {
            return Err(data("generation returned no sentences"));
        }
        log::info!(
            "generated {} sentences, {} verb slots unanswered",
            outcome.sentences.len(),
            outcome.omitted.len()
        );
        let path = self.out("sentences.jsonl");
        fs::create_dir_all(self.out_dir()).map_err(|e| data(format!("{}: {e}", self.out_dir().display())))?;
        store_corpus(&CorpusRecords::Sentences(outcome.sentences), &path)?;
        io.outputs.push(path);
        let mut omitted = String::from("batch_id\tverb\n");
        for (batch, verb) in &outcome.omitted {
            omitted.push_str(&format!("{batch}\t{verb}\n"));
        }
        write_file(&self.out("generation_omitted.tsv"), omitted.as_bytes(), io)?;
        self.record_transcript(&outcome.exchanges, io)
    }

    fn parse_llm(&self, io: &mut Io) -> Result<(), PipelineError> {
        let (_, lex) = self.lexicon(io)?;
        let sentences = self.sentences(io, &lex)?;
        let backend = self.backend(&lex)?;
        let outcome = run_parsing(&sentences, backend.as_ref(), &self.cfg.backend.driver, LLM_SOURCE)?;
        log::info!(
            "annotated {} of {} sentences",
            outcome.annotations.len(),
            sentences.len()
        );
        write_file(
            &self.out("annotations.jsonl"),
            jsonl::render(ANNOTATIONS_SCHEMA, &outcome.annotations).as_bytes(),
            io,
        )?;
        let missing: Vec<MissingLine> = outcome
            .missing
            .iter()
            .map(|r| MissingLine {
                sentence_id: r.id,
                reason: r.reason,
                detail: r.detail.clone(),
            })
            .collect();
        write_file(
            &self.out("gateway_missing.jsonl"),
            jsonl::render(MISSING_SCHEMA, &missing).as_bytes(),
            io,
        )?;
        self.record_transcript(&outcome.exchanges, io)
    }

    fn ingest_trees(&self, io: &mut Io) -> Result<(), PipelineError> {
        let (_, lex) = self.lexicon(io)?;
        let sentences = self.sentences(io, &lex)?;
        let by_id: BTreeMap<u64, &SentenceRecord> = sentences.iter().map(|s| (s.id, s)).collect();
        let path = self
            .cfg
            .paths
            .trees
            .as_deref()
            .ok_or_else(|| config("ingest-trees needs paths.trees"))?;
        io.input(path);
        let lines = jsonl::read::<TreeLine>(path, TREES_SCHEMA)?;
        let mut out: BTreeMap<(String, u64), TreeAnnotationLine> = BTreeMap::new();
        for l in lines {
            let at = |m: String| data(format!("{}:{}: {m}", path.display(), l.line));
            let t = &l.value;
            let sentence = by_id
                .get(&t.sentence_id)
                .ok_or_else(|| at(format!("sentence {} is not in the corpus", t.sentence_id)))?;
            let parsed = t.parse().map_err(|e| at(e.to_string()))?;
            let verb = lex.get(&sentence.verb_lemma).expect("references checked");
            let (outcome, frame) = match frame_from_tree(&parsed, verb) {
                TreeFrame::Frame(f) => (TreeOutcome::Frame, Some(f.to_string())),
                TreeFrame::NotAVerb => (TreeOutcome::NotAVerb, None),
                TreeFrame::NotFound => (TreeOutcome::NotFound, None),
            };
            let source = t.source.as_str().to_string();
            let key = (source.clone(), t.sentence_id);
            if out.contains_key(&key) {
                return Err(at(format!("second {source} tree for sentence {}", t.sentence_id)));
            }
            out.insert(
                key,
                TreeAnnotationLine {
                    sentence_id: t.sentence_id,
                    source,
                    outcome,
                    frame,
                },
            );
        }
        let records: Vec<TreeAnnotationLine> = out.into_values().collect();
        write_file(
            &self.out("tree_annotations.jsonl"),
            jsonl::render(TREE_ANNOTATIONS_SCHEMA, &records).as_bytes(),
            io,
        )
    }

    fn llm_records(
        &self,
        io: &mut Io,
        sentences: &[SentenceRecord],
    ) -> Result<BTreeMap<String, Vec<AnnotatedRecord>>, PipelineError> {
        let mut out = BTreeMap::new();
        let ann_path = self
            .cfg
            .paths
            .annotations
            .clone()
            .unwrap_or_else(|| self.out("annotations.jsonl"));
        if !ann_path.exists() {
            if self.cfg.paths.annotations.is_some() {
                return Err(config(format!(
                    "paths.annotations {} does not exist",
                    ann_path.display()
                )));
            }
            return Ok(out);
        }
        io.input(&ann_path);
        let known: BTreeSet<u64> = sentences.iter().map(|s| s.id).collect();
        let mut by_source: BTreeMap<String, BTreeMap<u64, Arguments>> = BTreeMap::new();
        for n in jsonl::read::<ArgumentAnnotation>(&ann_path, ANNOTATIONS_SCHEMA)? {
            let a = n.value;
            let at = |m: String| data(format!("{}:{}: {m}", ann_path.display(), n.line));
            if !known.contains(&a.sentence_id) {
                return Err(at(format!("sentence {} is not in the corpus", a.sentence_id)));
            }
            if by_source
                .entry(a.source.clone())
                .or_default()
                .insert(a.sentence_id, a.arguments)
                .is_some()
            {
                return Err(at(format!(
                    "second {} annotation for sentence {}",
                    a.source, a.sentence_id
                )));
            }
        }
        if by_source.is_empty() {
            by_source.insert(LLM_SOURCE.to_string(), BTreeMap::new());
        }
        let mut reasons: BTreeMap<u64, String> = BTreeMap::new();
        let miss_path = self.out("gateway_missing.jsonl");
        if self.cfg.paths.annotations.is_none() && miss_path.exists() {
            io.input(&miss_path);
            for n in jsonl::read::<MissingLine>(&miss_path, MISSING_SCHEMA)? {
                reasons.insert(n.value.sentence_id, format!("{}: {}", n.value.reason, n.value.detail));
            }
        }
        for (source, mut anns) in by_source {
            let records = sentences
                .iter()
                .map(|s| AnnotatedRecord {
                    sentence: s.clone(),
                    source: source.clone(),
                    annotation: match anns.remove(&s.id) {
                        Some(a) => Annotation::Llm(a),
                        None => Annotation::Missing(
                            reasons
                                .get(&s.id)
                                .cloned()
                                .unwrap_or_else(|| "no annotation returned".into()),
                        ),
                    },
                })
                .collect();
            out.insert(source, records);
        }
        Ok(out)
    }

    fn tree_records(
        &self,
        io: &mut Io,
        sentences: &[SentenceRecord],
    ) -> Result<BTreeMap<String, Vec<AnnotatedRecord>>, PipelineError> {
        let mut out: BTreeMap<String, Vec<AnnotatedRecord>> = BTreeMap::new();
        if self.cfg.paths.trees.is_none() {
            return Ok(out);
        }
        let path = self.out("tree_annotations.jsonl");
        if !path.exists() {
            return Err(config("paths.trees is set but ingest-trees has not been run"));
        }
        io.input(&path);
        let by_id: BTreeMap<u64, &SentenceRecord> = sentences.iter().map(|s| (s.id, s)).collect();
        for n in jsonl::read::<TreeAnnotationLine>(&path, TREE_ANNOTATIONS_SCHEMA)? {
            let at = |m: String| data(format!("{}:{}: {m}", path.display(), n.line));
            let t = n.value;
            let s = by_id
                .get(&t.sentence_id)
                .ok_or_else(|| at(format!("sentence {} is not in the corpus", t.sentence_id)))?;
            let frame = t.to_tree_frame().map_err(at)?;
            out.entry(t.source.clone()).or_default().push(AnnotatedRecord {
                sentence: (*s).clone(),
                source: t.source,
                annotation: Annotation::Tree(frame),
            });
        }
        Ok(out)
    }

    fn clean(&self, io: &mut Io) -> Result<(), PipelineError> {
        let (_, lex) = self.lexicon(io)?;
        let sentences = self.sentences(io, &lex)?;
        let mut sources = self.llm_records(io, &sentences)?;
        for (k, v) in self.tree_records(io, &sentences)? {
            if sources.insert(k.clone(), v).is_some() {
                return Err(data(format!("source `{k}` appears both as annotations and as trees")));
            }
        }
        if sources.is_empty() {
            return Err(config(
                "nothing to clean: run parse-llm or ingest-trees first, or set paths.annotations",
            ));
        }
        let rules = CleaningRules {
            enabled: ExclusionRule::ALL.into_iter().collect(),
            passive_window: self.cfg.passive_window,
        };
        let mut frames = Vec::new();
        for (source, records) in sources {
            let total = records.len();
            let (kept, ledger) = apply_exclusions(records, &lex, &rules);
            log::info!("{source}: kept {} of {total}", kept.len());
            let framed = to_framed(&kept).map_err(|(id, e)| data(format!("sentence {id}: {e}")))?;
            frames.extend(framed);
            let name = file_name_part(&source);
            write_file(
                &self.out(&format!("exclusions_{name}.tsv")),
                ledger.render_report(total).as_bytes(),
                io,
            )?;
            let entries: Vec<&LedgerEntry> = ledger.entries().collect();
            write_file(
                &self.out(&format!("ledger_{name}.jsonl")),
                jsonl::render(LEDGER_SCHEMA, &entries).as_bytes(),
                io,
            )?;
        }
        frames.sort_by(|a, b| (&a.source, a.sentence_id).cmp(&(&b.source, b.sentence_id)));
        write_file(
            &self.out("frames.jsonl"),
            jsonl::render(FRAMES_SCHEMA, &frames).as_bytes(),
            io,
        )
    }

    fn frames(&self, io: &mut Io) -> Result<Vec<FramedRecord>, PipelineError> {
        let path = self.out("frames.jsonl");
        if !path.exists() {
            return Err(config("no frames.jsonl in the output directory; run clean first"));
        }
        io.input(&path);
        Ok(jsonl::read::<FramedRecord>(&path, FRAMES_SCHEMA)?
            .into_iter()
            .map(|n| n.value)
            .collect())
    }

    fn count(&self, io: &mut Io) -> Result<(), PipelineError> {
        let frames = self.frames(io)?;
        let mut by_source: BTreeMap<&str, Vec<&FramedRecord>> = BTreeMap::new();
        for f in &frames {
            by_source.entry(f.source.as_str()).or_default().push(f);
        }
        let mut raw = Vec::new();
        let mut binned = Vec::new();
        let mut binning: BTreeMap<String, Binning> = BTreeMap::new();
        for (source, recs) in by_source {
            let t = count_frames(recs, source);
            let b = bin_low_frequency(&t, self.cfg.percentile).map_err(|e| data(format!("{source}: {e}")))?;
            binning.insert(source.to_string(), b.binning.clone().expect("binning recorded"));
            raw.push(t);
            binned.push(b);
        }
        if raw.is_empty() {
            log::warn!("every record was excluded; frame tables are empty");
        }
        write_file(&self.out("vff.tsv"), render_tsv(&binned).as_bytes(), io)?;
        write_file(&self.out("vff_unbinned.tsv"), render_tsv(&raw).as_bytes(), io)?;
        let mut text = serde_json::to_string_pretty(&binning).expect("binning serializes");
        text.push('\n');
        write_file(&self.out("binning.json"), text.as_bytes(), io)
    }

    fn evaluate(&self, io: &mut Io) -> Result<(), PipelineError> {
        let g = &self.cfg.gold;
        if !g.any() {
            return Err(config("evaluate needs at least one gold.* path in the config"));
        }
        let (_, lex) = self.lexicon(io)?;
        let frames = self.frames(io)?;
        let mut gold: BTreeMap<GoldKind, GoldTable> = BTreeMap::new();
        for (kind, path) in [
            (GoldKind::Gahl, &g.gahl),
            (GoldKind::Trueswell, &g.trueswell),
            (GoldKind::Garnsey, &g.garnsey),
            (GoldKind::Hawkins, &g.hawkins),
            (GoldKind::Human, &g.human),
        ] {
            if let Some(p) = path {
                io.input(p);
                gold.insert(kind, load_gold(p, kind)?);
            }
        }
        let suite = run_suite(&SuiteInput {
            frames: &frames,
            lexicon: &lex,
            gold: &gold,
            relabel_pp: self.cfg.relabel_pp,
            sc_includes_s: self.cfg.sc_includes_s,
            clamp: self.cfg.clamp,
        })?;
        let dir = self.out("eval");
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
        }
        self.write_eval(&suite.report, io)?;
        for (source, (ledger, seen)) in &suite.alternation {
            write_file(
                &dir.join(format!("alternation_{}.tsv", file_name_part(source))),
                ledger.render_report(*seen).as_bytes(),
                io,
            )?;
        }
        let mut json = serde_json::to_string_pretty(&suite.report).expect("report serializes");
        json.push('\n');
        write_file(&self.out("eval_report.json"), json.as_bytes(), io)
    }

    fn write_eval(&self, r: &EvalReport, io: &mut Io) -> Result<(), PipelineError> {
        let dir = self.out("eval");
        let f6 = |x: f64| num(x, 6);
        let rows: Vec<Vec<String>> = r
            .regressions
            .iter()
            .map(|x| {
                let c = &x.comparison.result;
                vec![
                    x.analysis.clone(),
                    x.dataset.to_string(),
                    x.frame.clone(),
                    x.source.clone(),
                    x.relabel_pp.to_string(),
                    c.n.to_string(),
                    f6(c.slope),
                    f6(c.intercept),
                    f6(c.std_error),
                    f6(c.t_slope),
                    format!("{:.6e}", c.p_value),
                    f6(c.r2),
                ]
            })
            .collect();
        write_file(
            &dir.join("regressions.csv"),
            csv_text(
                &[
                    "analysis",
                    "dataset",
                    "frame",
                    "source",
                    "relabel_pp",
                    "n",
                    "slope",
                    "intercept",
                    "std_error",
                    "t",
                    "p",
                    "r2",
                ],
                &rows,
            )
            .as_bytes(),
            io,
        )?;
        let rows: Vec<Vec<String>> = r
            .bayes
            .iter()
            .map(|b| {
                vec![
                    b.analysis.clone(),
                    b.dataset.to_string(),
                    b.frame.clone(),
                    b.model_a.clone(),
                    b.model_b.clone(),
                    b.n.to_string(),
                    f6(b.bayes.log10_bf),
                    b.bayes.jeffreys_label.to_string(),
                    format!("{:?}", b.bayes.winner).to_lowercase(),
                ]
            })
            .collect();
        write_file(
            &dir.join("bayes_factors.csv"),
            csv_text(
                &[
                    "analysis", "dataset", "frame", "model_a", "model_b", "n", "log10_bf", "evidence", "winner",
                ],
                &rows,
            )
            .as_bytes(),
            io,
        )?;
        let rows: Vec<Vec<String>> = r
            .biases
            .iter()
            .map(|b| vec![b.analysis.clone(), b.source.clone(), b.verb.clone(), f6(b.log_odds)])
            .collect();
        write_file(
            &dir.join("biases.csv"),
            csv_text(&["analysis", "source", "verb", "log_odds"], &rows).as_bytes(),
            io,
        )?;
        let rows: Vec<Vec<String>> = r
            .source_agreement
            .iter()
            .map(|a| vec![a.source_a.clone(), a.source_b.clone(), a.n.to_string(), f6(a.rate)])
            .collect();
        write_file(
            &dir.join("agreement.csv"),
            csv_text(&["source_a", "source_b", "n", "rate"], &rows).as_bytes(),
            io,
        )?;
        if !r.human.is_empty() {
            let rows: Vec<Vec<String>> = r
                .human
                .iter()
                .flat_map(|h| {
                    h.agreement
                        .per_verb
                        .iter()
                        .map(|v| vec![h.source.clone(), v.verb.clone(), v.n.to_string(), f6(v.rate)])
                        .chain(std::iter::once(vec![
                            h.source.clone(),
                            "all".into(),
                            h.agreement.n.to_string(),
                            f6(h.agreement.overall),
                        ]))
                })
                .collect();
            write_file(
                &dir.join("human_agreement.csv"),
                csv_text(&["source", "verb", "n", "rate"], &rows).as_bytes(),
                io,
            )?;
        }
        let mut used = BTreeSet::new();
        for x in &r.regressions {
            let mut stem = file_name_part(&format!("{}_{}_{}_{}", x.analysis, x.dataset, x.frame, x.source));
            if x.relabel_pp {
                stem.push_str("_pp_merged");
            }
            let mut name = stem.clone();
            let mut k = 2;
            while !used.insert(name.clone()) {
                name = format!("{stem}_{k}");
                k += 1;
            }
            let pts = &x.comparison.points;
            let rows: Vec<Vec<String>> = pts.iter().map(|(v, a, b)| vec![v.clone(), f6(*a), f6(*b)]).collect();
            write_file(
                &dir.join(format!("scatter_{name}.csv")),
                csv_text(&["verb", "estimate", "gold"], &rows).as_bytes(),
                io,
            )?;
            let c = &x.comparison.result;
            let title = format!("{} {} vs {} (r² = {})", x.source, x.frame, x.dataset, num(c.r2, 3));
            let svg = report::scatter_svg(&title, "estimate", "gold", pts, Some((c.slope, c.intercept)));
            write_file(
                &dir.join("figures").join(format!("scatter_{name}.svg")),
                svg.as_bytes(),
                io,
            )?;
        }
        write_file(&dir.join("summary.md"), report::render_eval_markdown(r).as_bytes(), io)
    }

    fn report(&self, io: &mut Io) -> Result<(), PipelineError> {
        let (_, lex) = self.lexicon(io)?;
        let sentences = self.sentences(io, &lex)?;
        let frames = self.frames(io)?;
        let mut tables: BTreeMap<String, VerbFrameTable> = BTreeMap::new();
        for f in &frames {
            tables
                .entry(f.source.clone())
                .or_insert_with(|| VerbFrameTable::new(&f.source))
                .add(&f.verb, &f.frame, 1);
        }
        let mut ledgers: BTreeMap<String, ExclusionLedger> = BTreeMap::new();
        let mut names: Vec<PathBuf> = fs::read_dir(self.out_dir())
            .map_err(|e| data(format!("{}: {e}", self.out_dir().display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ledger_") && n.ends_with(".jsonl"))
            })
            .collect();
        names.sort();
        for p in names {
            io.input(&p);
            let source = p
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.strip_prefix("ledger_"))
                .expect("filtered above")
                .to_string();
            let mut ledger = ExclusionLedger::default();
            for n in jsonl::read::<LedgerEntry>(&p, LEDGER_SCHEMA)? {
                ledger.record(n.value.sentence_id, n.value.rule, n.value.detail);
            }
            ledgers.insert(source, ledger);
        }
        let all_sources: BTreeSet<String> = tables.keys().chain(ledgers.keys()).cloned().collect();
        let summaries: Vec<SourceSummary> = all_sources
            .iter()
            .map(|s| {
                let kept = tables.get(s).map_or(0, |t| t.total() as usize);
                let ledger = ledgers.get(s);
                SourceSummary {
                    source: s.clone(),
                    input: kept + ledger.map_or(0, |l| l.len()),
                    kept,
                    by_rule: ledger.map(|l| l.counts()).unwrap_or_default(),
                }
            })
            .collect();
        let binning_path = self.out("binning.json");
        let binning: BTreeMap<String, Binning> = if binning_path.exists() {
            io.input(&binning_path);
            let text =
                fs::read_to_string(&binning_path).map_err(|e| data(format!("{}: {e}", binning_path.display())))?;
            serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", binning_path.display())))?
        } else {
            BTreeMap::new()
        };
        let frame_totals: BTreeMap<String, Vec<(String, u64)>> = tables
            .iter()
            .map(|(s, t)| {
                let mut v: Vec<(String, u64)> = t.frame_totals().into_iter().map(|(f, c)| (f.to_string(), c)).collect();
                v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (s.clone(), v)
            })
            .collect();
        let summary_path = self.out("eval").join("summary.md");
        let eval = if summary_path.exists() {
            io.input(&summary_path);
            Some(fs::read_to_string(&summary_path).map_err(|e| data(format!("{}: {e}", summary_path.display())))?)
        } else {
            None
        };
        let md = report::render_markdown(&report::ReportInputs {
            sentences: sentences.len(),
            sources: &summaries,
            binning: &binning,
            frame_totals: &frame_totals,
            eval: eval.as_deref(),
        });
        write_file(&self.out("report.md"), md.as_bytes(), io)?;
        for (s, v) in &frame_totals {
            let bars: Vec<(String, u64)> = v.iter().take(15).cloned().collect();
            let svg = report::bar_svg(&format!("Most frequent frames: {s}"), &bars);
            write_file(
                &self.out("figures").join(format!("frames_{}.svg", file_name_part(s))),
                svg.as_bytes(),
                io,
            )?;
        }
        Ok(())
    }
}
