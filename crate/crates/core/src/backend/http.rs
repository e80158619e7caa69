use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendConfig, BackendError, PromptSpec, RawResponse};
use super::response::Usage;

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        InFlight {
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Retry(String),
    Fail(BackendError),
}

/// Chat-completion client: one user message per query, first choice's
/// content is the response text. Connection failures, timeouts, 429 and
/// 5xx responses are retried with exponential backoff.
#[derive(Debug)]
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    cfg: BackendConfig,
    in_flight: InFlight,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .filter(|e| !e.trim().is_empty())
            .ok_or_else(|| BackendError::Config("http backend requires an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            agent,
            endpoint,
            in_flight: InFlight::new(cfg.max_in_flight),
            cfg,
        })
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<RawResponse, Attempt> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Err(classify(e)),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("status {status}: {}", truncate(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fail(BackendError::Rejected {
                status,
                body: truncate(&text),
            }));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fail(BackendError::Malformed(e.to_string())))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Fail(BackendError::Malformed("no choices".into())))?;
        Ok(RawResponse {
            text: content,
            usage: parsed.usage.map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.cfg.backoff.saturating_mul(factor).min(MAX_BACKOFF)
    }
}

fn classify(e: ureq::Error) -> Attempt {
    use ureq::Error as E;
    match e {
        E::Timeout(_) | E::Io(_) | E::ConnectionFailed | E::HostNotFound | E::Protocol(_)
        | E::BodyStalled => Attempt::Retry(e.to_string()),
        E::BadUri(_) | E::RequireHttpsOnly(_) => {
            Attempt::Fail(BackendError::Config(e.to_string()))
        }
        other => Attempt::Fail(BackendError::Malformed(other.to_string())),
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

impl Backend for HttpBackend {
    fn query(&self, prompt: &PromptSpec) -> Result<RawResponse, BackendError> {
        let rendered = prompt.render();
        let body = ChatRequest {
            model: &self.cfg.model_name,
            temperature: self.cfg.temperature,
            messages: [ChatMessage {
                role: "user",
                content: &rendered,
            }],
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = {
                let _permit = self.in_flight.acquire();
                self.attempt(&body)
            };
            match outcome {
                Ok(r) => return Ok(r),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(cause)) => {
                    if attempts > self.cfg.max_retries {
                        return Err(BackendError::Exhausted { attempts, cause });
                    }
                    thread::sleep(self.backoff(attempts - 1));
                }
            }
        }
    }
}
