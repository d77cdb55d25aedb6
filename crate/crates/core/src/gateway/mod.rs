//! Prompt construction, batching and LLM backends.
//!
//! Generation prompts carry one context and a numbered verb list; parsing
//! prompts carry at most [`MAX_BATCH`] sentences as a JSON object. Requests
//! go through a [`Backend`]: a live chat-completion endpoint, a recorded
//! transcript, or a deterministic mock.

mod backend;
mod driver;
mod mock;
mod prompts;
mod validate;

pub use backend::{
    digest, load_transcript, render_transcript, Backend, BackendError, ChatRequest, LiveBackend, Sampling,
    TranscriptBackend, TranscriptEntry, TRANSCRIPT_SCHEMA,
};
pub use driver::{run_generation, run_parsing, DriverOptions, Exchange, GenerationOutcome, ParsingOutcome};
pub use mock::MockBackend;
pub use prompts::{
    build_generation_prompt, build_parsing_prompt, chunk_batches, PromptBundle, PromptItem, PromptKind,
    GENERATION_TEMPLATE, MAX_BATCH, PARSING_TEMPLATE,
};
pub use validate::{
    parse_generation_response, strip_code_fence, validate_parse_response, GeneratedLine, ParseResponseItem,
    RejectReason, Rejection, Validation,
};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("parsing batch has {0} sentences; split it with chunk_batches (at most {MAX_BATCH})")]
    BatchTooLarge(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no verbs for generation prompt")]
    NoVerbs,
    #[error("backend failed on batch {batch_id} after {attempts} attempts: {source}")]
    Backend {
        batch_id: String,
        attempts: usize,
        #[source]
        source: BackendError,
    },
}
