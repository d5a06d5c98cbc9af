//! Blocking JSON-over-HTTP POST with bounded retries, shared by the
//! embedding and completion clients.

use std::time::{Duration, Instant};

use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("{url} answered HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    max_retries: u32,
}

/// Decoded body plus the wall-clock time of the successful attempt.
pub(crate) struct Timed<T> {
    pub value: T,
    pub elapsed: Duration,
}

impl JsonClient {
    pub fn new(timeout_s: f64, max_retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, max_retries }
    }

    /// Transport failures and 5xx answers are retried up to `max_retries`
    /// times; 4xx answers and undecodable bodies fail immediately.
    pub fn post<B: Serialize, T: DeserializeOwned>(&self, url: &str, body: &B) -> Result<Timed<T>, HttpError> {
        let attempts_allowed = self.max_retries + 1;
        let mut last_failure = String::new();
        for attempt in 1..=attempts_allowed {
            let started = Instant::now();
            let mut resp = match self.agent.post(url).send_json(body) {
                Ok(r) => r,
                Err(e) => {
                    warn!("POST {url} attempt {attempt}/{attempts_allowed}: {e}");
                    last_failure = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = match resp.body_mut().read_to_string() {
                Ok(t) => t,
                Err(e) => {
                    warn!("POST {url} attempt {attempt}/{attempts_allowed}: {e}");
                    last_failure = e.to_string();
                    continue;
                }
            };
            let elapsed = started.elapsed();
            if (500..600).contains(&status) {
                warn!("POST {url} attempt {attempt}/{attempts_allowed}: HTTP {status}");
                last_failure = format!("HTTP {status}: {text}");
                continue;
            }
            if status != 200 {
                return Err(HttpError::Status {
                    url: url.to_string(),
                    status,
                    body: text,
                });
            }
            let value = serde_json::from_str(&text).map_err(|e| HttpError::Malformed {
                url: url.to_string(),
                message: e.to_string(),
            })?;
            return Ok(Timed { value, elapsed });
        }
        Err(HttpError::Transport {
            url: url.to_string(),
            attempts: attempts_allowed,
            message: last_failure,
        })
    }
}

/// Joins a base URL and an absolute API path without doubling slashes.
pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}{}", base.trim_end_matches('/'), path)
}
