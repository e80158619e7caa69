use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::{Backend, BackendError, PromptSpec, RawResponse};
use crate::ingest::{GroundTruth, LogSet};
use crate::template::PLACEHOLDER;

/// Deterministic stand-in for a model that answers from ground truth.
///
/// Every queried log whose content is known gets its oracle template back in
/// the constrained response format, with placeholders written as `{param}`.
/// Unknown logs are echoed verbatim.
#[derive(Debug, Default)]
pub struct OracleBackend {
    oracle: HashMap<String, String>,
    latency: Duration,
    calls: AtomicU64,
}

impl OracleBackend {
    pub fn new(oracle: HashMap<String, String>) -> Self {
        OracleBackend {
            oracle,
            ..Default::default()
        }
    }

    /// Pairs every record with its ground-truth template by line id.
    pub fn from_ground_truth(logs: &LogSet, truth: &GroundTruth) -> Self {
        let oracle = logs
            .iter()
            .filter_map(|r| truth.get(r.line_id).map(|t| (r.content.clone(), t.to_owned())))
            .collect();
        Self::new(oracle)
    }

    /// Sleeps this long on every call, to simulate a remote model.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn answer(&self, log: &str) -> String {
        match self.oracle.get(log) {
            Some(t) => t.replace(PLACEHOLDER, "{param}"),
            None => log.to_owned(),
        }
    }
}

impl Backend for OracleBackend {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let mut text = String::new();
        for (i, log) in prompt.lcu_logs.iter().enumerate() {
            text.push_str(&format!("LogTemplate[{}]: `{}`\n", i + 1, self.answer(log)));
        }
        Ok(RawResponse::new(text))
    }
}

/// Wraps a backend and replaces a fixed fraction of its responses with prose
/// that carries no template.
///
/// Call `n` (0-based, counted across all threads) is corrupted when
/// `floor((n + 1 + phase) * rate) > floor((n + phase) * rate)`, so exactly
/// `rate` of any long run of calls is corrupted.
#[derive(Debug)]
pub struct NoisyBackend<B> {
    inner: B,
    rate: f64,
    phase: u64,
    calls: AtomicU64,
    corrupted: AtomicU64,
}

impl<B: Backend> NoisyBackend<B> {
    pub fn new(inner: B, rate: f64, phase: u64) -> Self {
        NoisyBackend {
            inner,
            rate: rate.clamp(0.0, 1.0),
            phase,
            calls: AtomicU64::new(0),
            corrupted: AtomicU64::new(0),
        }
    }

    pub fn corrupted(&self) -> u64 {
        self.corrupted.load(Ordering::Relaxed)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn should_corrupt(&self, n: u64) -> bool {
        let at = |i: u64| ((i + self.phase) as f64 * self.rate).floor();
        at(n + 1) > at(n)
    }
}

impl<B: Backend> Backend for NoisyBackend<B> {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::Relaxed);
        let resp = self.inner.query(prompt)?;
        if self.should_corrupt(n) {
            self.corrupted.fetch_add(1, Ordering::Relaxed);
            return Ok(RawResponse::new(
                "These messages look like routine service activity. I am not able to \
                 say which parts are variable without more context.",
            ));
        }
        Ok(resp)
    }
}
