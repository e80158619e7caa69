//! Language-model backends and the prompt/response contract around them.

mod http;
mod mock;
pub mod prompt;
pub mod response;

use std::time::Duration;

use thiserror::Error;

pub use http::HttpBackend;
pub use mock::{NoisyBackend, OracleBackend};
pub use prompt::{
    build_prompt, default_parameter_examples, load_parameter_examples, ParameterExample, PromptSpec,
};
pub use response::{aggregate_and_normalize, extract_templates, ExtractionError, RawResponse};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request failed after {attempts} attempt(s): {cause}")]
    Exhausted { attempts: u32, cause: String },
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    /// First retry delay; doubles on every further attempt.
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model_name: "gpt-3.5-turbo".to_owned(),
            api_key: None,
            temperature: 0.0,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            backoff: Duration::from_millis(500),
            max_in_flight: 8,
        }
    }
}

/// A model endpoint. Implementations are shared by all parse workers.
pub trait Backend: Send + Sync {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        (**self).query(prompt)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        (**self).query(prompt)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        (**self).query(prompt)
    }
}
