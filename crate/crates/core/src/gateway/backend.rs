use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jsonl::{self, JsonlError};

/// Sampling parameters; `None` leaves the provider default in place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
}

/// A single chat-completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub sampling: Sampling,
}

/// Hex SHA-256 over the request's canonical JSON.
pub fn digest(req: &ChatRequest) -> String {
    let bytes = serde_json::to_vec(req).expect("serializing plain structs");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected endpoint payload: {0}")]
    Payload(String),
    #[error("request {0} is not in the transcript")]
    NotRecorded(String),
    #[error("{0}")]
    Config(String),
}

impl BackendError {
    /// Whether another attempt might succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Payload(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            BackendError::NotRecorded(_) | BackendError::Config(_) => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError>;
}

/// OpenAI-style chat-completions endpoint over HTTPS.
pub struct LiveBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

impl LiveBackend {
    pub fn new(endpoint: &str, api_key: &str, timeout: Duration) -> Result<Self, BackendError> {
        if endpoint.is_empty() {
            return Err(BackendError::Config("live backend needs an endpoint".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(LiveBackend {
            client,
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
        })
    }

    /// Reads the API key from the named environment variable.
    pub fn from_env(endpoint: &str, key_var: &str, timeout: Duration) -> Result<Self, BackendError> {
        let key = std::env::var(key_var)
            .map_err(|_| BackendError::Config(format!("environment variable {key_var} is not set")))?;
        Self::new(endpoint, &key, timeout)
    }
}

impl Backend for LiveBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &req.model,
            messages: [
                WireMessage {
                    role: "system",
                    content: &req.system,
                },
                WireMessage {
                    role: "user",
                    content: &req.user,
                },
            ],
            temperature: req.sampling.temperature,
            top_p: req.sampling.top_p,
            max_tokens: req.sampling.max_tokens,
        };
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(serde_json::to_string(&body).expect("serializing plain structs"))
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| BackendError::Payload(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError::Payload("no choices[0].message.content".into()))
    }
}

pub const TRANSCRIPT_SCHEMA: &str = "vff.transcript";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    /// Kept for auditing; replay only looks at the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<ChatRequest>,
    pub response: String,
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, JsonlError> {
    Ok(jsonl::read::<TranscriptEntry>(path, TRANSCRIPT_SCHEMA)?
        .into_iter()
        .map(|n| n.value)
        .collect())
}

pub fn render_transcript(entries: &[TranscriptEntry]) -> String {
    jsonl::render(TRANSCRIPT_SCHEMA, entries)
}

/// Replays recorded responses by request digest.
#[derive(Debug, Clone, Default)]
pub struct TranscriptBackend {
    responses: HashMap<String, String>,
}

impl TranscriptBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Result<Self, BackendError> {
        let mut responses = HashMap::with_capacity(entries.len());
        for e in entries {
            if responses.insert(e.digest.clone(), e.response).is_some() {
                return Err(BackendError::Config(format!("transcript repeats digest {}", e.digest)));
            }
        }
        Ok(TranscriptBackend { responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for TranscriptBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let d = digest(req);
        self.responses.get(&d).cloned().ok_or(BackendError::NotRecorded(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn req(user: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            system: "s".into(),
            user: user.into(),
            sampling: Sampling::default(),
        }
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        assert_eq!(digest(&req("a")), digest(&req("a")));
        assert_ne!(digest(&req("a")), digest(&req("b")));
        let mut r = req("a");
        r.sampling.temperature = Some(0.0);
        assert_ne!(digest(&r), digest(&req("a")));
        assert_eq!(digest(&req("a")).len(), 64);
    }

    #[test]
    fn transcript_replay() {
        let entries = vec![TranscriptEntry {
            digest: digest(&req("a")),
            request: None,
            response: "hello".into(),
        }];
        let b = TranscriptBackend::new(entries.clone()).unwrap();
        assert_eq!(b.complete(&req("a")).unwrap(), "hello");
        assert!(matches!(b.complete(&req("b")), Err(BackendError::NotRecorded(_))));
        let doubled = [entries.clone(), entries].concat();
        assert!(TranscriptBackend::new(doubled).is_err());
    }

    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut body_in = vec![0; len];
            reader.read_exact(&mut body_in).unwrap();
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            reader.get_mut().write_all(reply.as_bytes()).unwrap();
            head + &String::from_utf8(body_in).unwrap()
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    #[test]
    fn live_backend_round_trip() {
        let (url, h) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"done"}}]}"#,
        );
        let b = LiveBackend::new(&url, "secret", Duration::from_secs(10)).unwrap();
        let mut r = req("hi");
        r.sampling.temperature = Some(0.5);
        assert_eq!(b.complete(&r).unwrap(), "done");
        let seen = h.join().unwrap();
        assert!(seen.to_ascii_lowercase().contains("authorization: bearer secret"));
        assert!(seen.contains(r#""messages":[{"role":"system","content":"s"},{"role":"user","content":"hi"}]"#));
        assert!(seen.contains(r#""temperature":0.5"#));
        assert!(!seen.contains("top_p"));
    }

    #[test]
    fn live_backend_http_error() {
        let (url, h) = serve_once("429 Too Many Requests", r#"{"error":"slow down"}"#);
        let b = LiveBackend::new(&url, "k", Duration::from_secs(10)).unwrap();
        let err = b.complete(&req("x")).unwrap_err();
        assert!(matches!(err, BackendError::Http { status: 429, .. }));
        assert!(err.is_transient());
        h.join().unwrap();
    }
}
