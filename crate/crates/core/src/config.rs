//! Pipeline configuration: a flat `key = value` file with `#` comments.
//!
//! Relative paths are resolved against the directory holding the file.
//! Unknown or repeated keys are errors so typos surface early.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cleaning::DEFAULT_PASSIVE_WINDOW;
use crate::gateway::{DriverOptions, Sampling, MAX_BATCH};
use crate::stats::Clamp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.origin, l, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Live,
    Transcript,
    Mock,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(BackendKind::Live),
            "transcript" => Ok(BackendKind::Transcript),
            "mock" => Ok(BackendKind::Mock),
            _ => Err(format!("unknown backend `{s}` (live, transcript or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub verbs: Option<PathBuf>,
    pub irregulars: Option<PathBuf>,
    pub contexts: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    /// Pre-computed LLM annotations; when set, `parse-llm` is not needed.
    pub annotations: Option<PathBuf>,
    pub trees: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldPaths {
    pub gahl: Option<PathBuf>,
    pub trueswell: Option<PathBuf>,
    pub garnsey: Option<PathBuf>,
    pub hawkins: Option<PathBuf>,
    pub human: Option<PathBuf>,
}

impl GoldPaths {
    pub fn any(&self) -> bool {
        self.gahl.is_some()
            || self.trueswell.is_some()
            || self.garnsey.is_some()
            || self.hawkins.is_some()
            || self.human.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub api_key_env: String,
    pub transcript: Option<PathBuf>,
    /// Write every exchange to `transcript.jsonl` in the output directory.
    pub record: bool,
    pub seed: u64,
    pub timeout_secs: u64,
    pub driver: DriverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Directory of the config file; relative paths were resolved against it.
    pub base_dir: PathBuf,
    pub paths: Paths,
    pub gold: GoldPaths,
    pub backend: BackendConfig,
    pub passive_window: usize,
    pub clamp: Clamp,
    pub percentile: f64,
    pub relabel_pp: bool,
    pub sc_includes_s: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_dir: PathBuf::from("."),
            paths: Paths {
                out: PathBuf::from("out"),
                ..Default::default()
            },
            gold: GoldPaths::default(),
            backend: BackendConfig {
                kind: BackendKind::Mock,
                endpoint: "https://api.openai.com/v1/chat/completions".into(),
                api_key_env: "OPENAI_API_KEY".into(),
                transcript: None,
                record: false,
                seed: 0,
                timeout_secs: 120,
                driver: DriverOptions::default(),
            },
            passive_window: DEFAULT_PASSIVE_WINDOW,
            clamp: Clamp::default(),
            percentile: 75.0,
            relabel_pp: true,
            sc_includes_s: true,
        }
    }
}

/// Splits the text into `key -> (value, line)`, rejecting repeats.
pub fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError {
            origin: origin.to_string(),
            line: Some(i + 1),
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.insert(k.to_string(), (v.trim().to_string(), i + 1)).is_some() {
            return Err(err(format!("key `{k}` given twice")));
        }
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

fn number<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("`{s}` is not a valid number"))
}

fn in_range<T: PartialOrd + fmt::Display + Copy>(v: T, lo: T, hi: T) -> Result<T, String> {
    if v < lo || v > hi {
        Err(format!("{v} outside [{lo}, {hi}]"))
    } else {
        Ok(v)
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text, origin)?;
        let mut c = PipelineConfig {
            base_dir: base_dir.to_path_buf(),
            ..Default::default()
        };
        c.paths.out = base_dir.join("out");
        let resolve = |v: &str| -> PathBuf {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        for (key, (value, line)) in &pairs {
            let v = value.as_str();
            let res: Result<(), String> = (|| {
                match key.as_str() {
                    "paths.verbs" => c.paths.verbs = Some(resolve(v)),
                    "paths.irregulars" => c.paths.irregulars = Some(resolve(v)),
                    "paths.contexts" => c.paths.contexts = Some(resolve(v)),
                    "paths.sentences" => c.paths.sentences = Some(resolve(v)),
                    "paths.annotations" => c.paths.annotations = Some(resolve(v)),
                    "paths.trees" => c.paths.trees = Some(resolve(v)),
                    "paths.out" => c.paths.out = resolve(v),
                    "gold.gahl" => c.gold.gahl = Some(resolve(v)),
                    "gold.trueswell" => c.gold.trueswell = Some(resolve(v)),
                    "gold.garnsey" => c.gold.garnsey = Some(resolve(v)),
                    "gold.hawkins" => c.gold.hawkins = Some(resolve(v)),
                    "gold.human" => c.gold.human = Some(resolve(v)),
                    "backend.kind" => c.backend.kind = v.parse()?,
                    "backend.endpoint" => c.backend.endpoint = v.to_string(),
                    "backend.api_key_env" => c.backend.api_key_env = v.to_string(),
                    "backend.transcript" => c.backend.transcript = Some(resolve(v)),
                    "backend.record" => c.backend.record = parse_bool(v)?,
                    "backend.seed" => c.backend.seed = number(v)?,
                    "backend.timeout_secs" => c.backend.timeout_secs = in_range(number(v)?, 1, 3600)?,
                    "backend.model_generate" => c.backend.driver.model_generate = v.to_string(),
                    "backend.model_parse" => c.backend.driver.model_parse = v.to_string(),
                    "backend.max_batch" => c.backend.driver.max_batch = in_range(number(v)?, 1, MAX_BATCH)?,
                    "backend.retries" => c.backend.driver.retries = in_range(number(v)?, 0, 20)?,
                    "backend.concurrency" => c.backend.driver.concurrency = in_range(number(v)?, 1, 64)?,
                    "sampling.temperature" => {
                        c.backend.driver.sampling.temperature = Some(in_range(number(v)?, 0.0, 2.0)?)
                    }
                    "sampling.top_p" => c.backend.driver.sampling.top_p = Some(in_range(number(v)?, 0.0, 1.0)?),
                    "sampling.max_tokens" => {
                        c.backend.driver.sampling.max_tokens = Some(in_range(number(v)?, 1, 1_000_000)?)
                    }
                    "cleaning.passive_window" => c.passive_window = in_range(number(v)?, 1, 10)?,
                    "cleaning.clamp_low" => c.clamp.low = number(v)?,
                    "cleaning.clamp_high" => c.clamp.high = number(v)?,
                    "binning.percentile" => c.percentile = number(v)?,
                    "eval.relabel_pp" => c.relabel_pp = parse_bool(v)?,
                    "eval.sc_includes_s" => c.sc_includes_s = parse_bool(v)?,
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            })();
            res.map_err(|message| ConfigError {
                origin: origin.to_string(),
                line: Some(*line),
                message: format!("{key}: {message}"),
            })?;
        }
        let whole = |message: String| ConfigError {
            origin: origin.to_string(),
            line: None,
            message,
        };
        c.clamp = Clamp::new(c.clamp.low, c.clamp.high).map_err(|e| whole(e.to_string()))?;
        if !(c.percentile > 0.0 && c.percentile <= 100.0) {
            return Err(whole(format!("binning.percentile {} outside (0, 100]", c.percentile)));
        }
        if c.backend.kind == BackendKind::Transcript && c.backend.transcript.is_none() {
            return Err(whole("backend.kind = transcript needs backend.transcript".into()));
        }
        Ok(c)
    }

    /// Sampling settings shared by both request kinds.
    pub fn sampling(&self) -> Sampling {
        self.backend.driver.sampling
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_resolution() {
        let c = PipelineConfig::parse(
            "# fixture\npaths.verbs = verbs.tsv\npaths.out = /tmp/x  # absolute\nbackend.retries = 1\nsampling.temperature = 0.7\n",
            "t.conf",
            Path::new("/data/run"),
        )
        .unwrap();
        assert_eq!(c.paths.verbs.as_deref(), Some(Path::new("/data/run/verbs.tsv")));
        assert_eq!(c.paths.out, Path::new("/tmp/x"));
        assert_eq!(c.backend.driver.retries, 1);
        assert_eq!(c.backend.driver.max_batch, 100);
        assert_eq!(c.backend.driver.concurrency, 4);
        assert_eq!(c.backend.driver.model_parse, "gpt-4o-2024-05-13");
        assert_eq!(c.sampling().temperature, Some(0.7));
        assert_eq!(c.percentile, 75.0);
        assert!(c.relabel_pp && c.sc_includes_s);
    }

    #[test]
    fn errors_carry_lines() {
        let e = PipelineConfig::parse("a.b = 1\n", "t", Path::new(".")).unwrap_err();
        assert!(e.message.contains("unknown key"));
        assert_eq!(e.line, Some(1));
        let e = PipelineConfig::parse("\nbackend.max_batch = 101\n", "t", Path::new(".")).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = PipelineConfig::parse("paths.out = a\npaths.out = b\n", "t", Path::new(".")).unwrap_err();
        assert!(e.message.contains("twice"));
        assert!(PipelineConfig::parse("nonsense\n", "t", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("backend.kind = transcript\n", "t", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("cleaning.clamp_high = 0.0005\n", "t", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("binning.percentile = 0\n", "t", Path::new(".")).is_err());
    }
}
