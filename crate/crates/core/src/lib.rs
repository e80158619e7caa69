//! Unsupervised log template extraction.
//!
//! Raw logs are sharded by token count and then by top-k frequent-token
//! signatures. From each bucket a small, contrastive group of logs (an LCU)
//! is chosen and sent to a language model with a prompt that needs no
//! labelled examples. The returned template consumes every matching log of
//! the length group, and the loop continues until all logs are parsed.
//!
//! The similarity, scoring and metric code is generic over [`Score`], so the
//! same routines run in `f64`, `f32`, or exact rationals.

pub mod backend;
pub mod ingest;
pub mod metrics;
pub mod output;
pub mod parser;
pub mod scalar;
pub mod selector;
pub mod sharder;
pub mod synth;
pub mod template;

pub use num_rational::Rational64;

pub use backend::{
    Backend, BackendConfig, BackendError, BackendKind, HttpBackend, NoisyBackend, OracleBackend,
    ParameterExample, PromptSpec, RawResponse,
};
pub use ingest::{load_ground_truth, load_logs, tokenize, GroundTruth, LogFormat, LogRecord, LogSet};
pub use metrics::{evaluate, EvaluationReport, MetricsError};
pub use parser::{
    parse_all, parse_group, ParseAssignment, ParseError, ParseOutput, ParseStats, ParserConfig,
    TemplateStore,
};
pub use scalar::Score;
pub use selector::{CandidateLcu, SelectorConfig};
pub use sharder::{Bucket, LengthGroup, ShardIndex, TokenSignature};
pub use template::{Template, PLACEHOLDER};

pub type Candidate = CandidateLcu<f64>;
pub type ExactCandidate = CandidateLcu<Rational64>;
pub type Selector = SelectorConfig<f64>;
pub type ExactSelector = SelectorConfig<Rational64>;
pub type Config = ParserConfig<f64>;
pub type ExactConfig = ParserConfig<Rational64>;
pub type Report = EvaluationReport<f64>;
pub type ExactReport = EvaluationReport<Rational64>;
