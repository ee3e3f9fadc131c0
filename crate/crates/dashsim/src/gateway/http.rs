use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use reqwest::StatusCode;
use reqwest::blocking::{Client, Response};
use serde_json::Value;

use super::prompt::request_body;
use super::{BackendInfo, Capabilities, Completion, CompletionBackend, ErrorKind, GatewayError, PromptPayload};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub api_key: String,
    /// Retries after the first attempt.
    pub retry_cap: u32,
    /// Per-attempt deadline.
    pub deadline: Duration,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub capabilities: Capabilities,
}

/// Caps concurrent requests across every backend sharing it.
#[derive(Debug)]
pub struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightGuard<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(max: usize) -> Arc<Self> {
        Arc::new(InFlightLimit { max: max.max(1), active: Mutex::new(0), freed: Condvar::new() })
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.max {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightGuard(self)
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: Client,
    limit: Arc<InFlightLimit>,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig, limit: Arc<InFlightLimit>) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .timeout(cfg.deadline)
            .build()
            .map_err(|e| GatewayError::new(ErrorKind::Transport, format!("cannot build HTTP client: {e}")))?;
        Ok(HttpBackend { cfg, client, limit })
    }

    fn backoff(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let exp = self.cfg.backoff_base.saturating_mul(1u32 << attempt.min(16));
        let capped = exp.min(self.cfg.backoff_max);
        let jittered = capped.mul_f64(rand::rng().random_range(0.5..=1.0));
        match retry_after {
            Some(ra) => jittered.max(ra).min(self.cfg.backoff_max),
            None => jittered,
        }
    }

    fn attempt(&self, body: &[u8]) -> Result<String, (GatewayError, Option<Duration>)> {
        let _slot = self.limit.acquire();
        let resp = self
            .client
            .post(&self.cfg.endpoint)
            .bearer_auth(&self.cfg.api_key)
            .header("content-type", "application/json")
            .body(body.to_vec())
            .send()
            .map_err(|e| (send_error(&e), None))?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = retry_after(&resp);
            let text = resp.text().unwrap_or_default();
            return Err((status_error(status, &text), retry_after));
        }
        let text = resp.text().map_err(|e| (send_error(&e), None))?;
        content(&text).map_err(|e| (e, None))
    }
}

fn send_error(e: &reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::new(ErrorKind::Deadline, format!("no response within the deadline: {e}"))
    } else {
        GatewayError::new(ErrorKind::Transport, e.to_string())
    }
}

fn status_error(status: StatusCode, body: &str) -> GatewayError {
    let snippet: String = body.chars().take(300).collect();
    let kind = match status.as_u16() {
        429 => ErrorKind::RateLimited,
        408 => ErrorKind::Deadline,
        500..=599 => ErrorKind::Transport,
        _ => ErrorKind::Refusal,
    };
    GatewayError::new(kind, format!("HTTP {status}: {snippet}"))
}

fn retry_after(resp: &Response) -> Option<Duration> {
    let secs: f64 = resp.headers().get("retry-after")?.to_str().ok()?.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then(|| Duration::from_secs_f64(secs))
}

fn content(body: &str) -> Result<String, GatewayError> {
    let malformed = |d: &str| GatewayError::new(ErrorKind::MalformedResponse, d);
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&format!("response is not JSON: {e}")))?;
    let choice = v.get("choices").and_then(|c| c.get(0)).ok_or_else(|| malformed("response has no choices"))?;
    let message = choice.get("message");
    if let Some(refusal) = message.and_then(|m| m.get("refusal")).and_then(Value::as_str) {
        return Err(GatewayError::new(ErrorKind::Refusal, refusal));
    }
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(GatewayError::new(ErrorKind::Refusal, "response withheld by the content filter"));
    }
    match message.and_then(|m| m.get("content")).and_then(Value::as_str) {
        Some(text) if !text.trim().is_empty() => Ok(text.to_string()),
        _ => Err(malformed("first choice has no message content")),
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, payload: &PromptPayload) -> Result<Completion, GatewayError> {
        let body = request_body(payload, &self.cfg.model, self.cfg.temperature, self.cfg.capabilities);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(Completion { text, attempts: attempt + 1 }),
                Err((mut e, retry_after)) => {
                    e.attempts = attempt + 1;
                    if !e.retryable || attempt >= self.cfg.retry_cap {
                        return Err(e);
                    }
                    tracing::debug!("attempt {} failed ({}), retrying", attempt + 1, e.detail);
                    thread::sleep(self.backoff(attempt, retry_after));
                    attempt += 1;
                }
            }
        }
    }

    fn capabilities(&self) -> Capabilities {
        self.cfg.capabilities
    }

    fn info(&self) -> BackendInfo {
        BackendInfo { model: self.cfg.model.clone(), temperature: self.cfg.temperature }
    }
}
