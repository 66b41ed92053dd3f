// SPDX-License-Identifier: MIT OR Apache-2.0

//! Client for an OpenAI-compatible `chat/completions` endpoint, plus an
//! offline stub whose replies are a pure function of the prompt.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::prompts::{build_cluster_prompt, build_refine_prompt, merge_prompt, PromptPayload};

#[derive(Debug, thiserror::Error)]
pub enum ExplainerError {
    #[error("explainer configuration error: {0}")]
    Config(String),
    #[error("environment variable {0} holding the explainer API key is not set")]
    MissingKey(String),
    #[error("explainer transport error: {0}")]
    Transport(String),
    #[error("explainer request timed out")]
    Timeout,
    #[error("explainer returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("explainer reply is missing field {0}")]
    Protocol(String),
    #[error("explainer reply has unexpected format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerMode {
    Live,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub mode: ExplainerMode,
    #[serde(default)]
    pub temperature: f32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_in_flight() -> usize {
    4
}

fn default_retries() -> u32 {
    2
}

impl ExplainerConfig {
    pub fn stub() -> Self {
        Self {
            base_url: String::new(),
            model_name: "stub".into(),
            api_key_env: String::new(),
            timeout_secs: 0.0,
            mode: ExplainerMode::Stub,
            temperature: 0.0,
            max_in_flight: default_in_flight(),
            retries: default_retries(),
        }
    }

    pub fn live(base_url: impl Into<String>, model_name: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: api_key_env.into(),
            timeout_secs: 60.0,
            mode: ExplainerMode::Live,
            temperature: 0.0,
            max_in_flight: default_in_flight(),
            retries: default_retries(),
        }
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            used: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        {
            let mut used = self.used.lock().expect("in-flight lock");
            while *used >= self.limit {
                used = self.freed.wait(used).expect("in-flight lock");
            }
            *used += 1;
        }
        let out = f();
        *self.used.lock().expect("in-flight lock") -= 1;
        self.freed.notify_one();
        out
    }
}

#[derive(Debug)]
pub struct Explainer {
    config: ExplainerConfig,
    http: Option<reqwest::blocking::Client>,
    in_flight: InFlight,
}

type Reply = Result<String, ExplainerError>;

impl Explainer {
    pub fn new(config: ExplainerConfig) -> Result<Self, ExplainerError> {
        let http = match config.mode {
            ExplainerMode::Stub => None,
            ExplainerMode::Live => {
                if config.base_url.is_empty() {
                    return Err(ExplainerError::Config("base_url is empty".into()));
                }
                if config.api_key_env.is_empty() {
                    return Err(ExplainerError::Config("api_key_env is empty".into()));
                }
                if !(config.timeout_secs > 0.0) {
                    return Err(ExplainerError::Config("timeout must be positive".into()));
                }
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs_f64(config.timeout_secs))
                    .build()
                    .map_err(|e| ExplainerError::Config(e.to_string()))?;
                Some(client)
            }
        };
        let in_flight = InFlight::new(config.max_in_flight);
        Ok(Self {
            config,
            http,
            in_flight,
        })
    }

    pub fn stub() -> Self {
        Self::new(ExplainerConfig::stub()).expect("stub config is valid")
    }

    pub fn config(&self) -> &ExplainerConfig {
        &self.config
    }

    pub fn chat(&self, system_prompt: &str, user_prompt: &str) -> Reply {
        match self.config.mode {
            ExplainerMode::Stub => Ok(stub_reply(system_prompt, user_prompt)),
            ExplainerMode::Live => {
                let key = std::env::var(&self.config.api_key_env)
                    .map_err(|_| ExplainerError::MissingKey(self.config.api_key_env.clone()))?;
                self.in_flight.run(|| self.chat_live(&key, system_prompt, user_prompt))
            }
        }
    }

    pub fn chat_payload(&self, payload: &PromptPayload) -> Reply {
        self.chat(&payload.system, &payload.user)
    }

    fn chat_live(&self, key: &str, system_prompt: &str, user_prompt: &str) -> Reply {
        let client = self.http.as_ref().expect("live mode has a client");
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        });
        let mut attempt = 0;
        loop {
            let sent = client.post(&url).bearer_auth(key).json(&body).send();
            let err = match sent {
                Ok(resp) => return read_reply(resp),
                Err(e) if e.is_timeout() => ExplainerError::Timeout,
                Err(e) => ExplainerError::Transport(e.to_string()),
            };
            if attempt >= self.config.retries {
                return Err(err);
            }
            log::warn!("explainer request failed ({err}); retrying");
            std::thread::sleep(Duration::from_millis(200 << attempt));
            attempt += 1;
        }
    }

    /// One-sentence description of a cluster of patterns.
    pub fn describe_cluster<S: AsRef<str>>(&self, patterns: &[S]) -> Reply {
        let payload = build_cluster_prompt(patterns)
            .map_err(|e| ExplainerError::Config(e.to_string()))?;
        checked_sentence(self.chat_payload(&payload)?)
    }

    /// Merges cluster descriptions into a feature description.
    pub fn merge_descriptions<S: AsRef<str>, T: AsRef<str>>(
        &self,
        descriptions: &[S],
        important_tokens: Option<&[T]>,
    ) -> Reply {
        let payload = merge_prompt(descriptions, important_tokens)
            .map_err(|e| ExplainerError::Config(e.to_string()))?;
        checked_sentence(self.chat_payload(&payload)?)
    }

    /// Weight-based refinement; returns the body of `[Concept: ...]`.
    pub fn refine<A: AsRef<str>, B: AsRef<str>, C: AsRef<str>>(
        &self,
        important: &[A],
        promoted: &[B],
        suppressed: &[C],
    ) -> Reply {
        let payload = build_refine_prompt(important, promoted, suppressed);
        parse_concept(&self.chat_payload(&payload)?)
    }
}

fn read_reply(resp: reqwest::blocking::Response) -> Reply {
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| ExplainerError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(ExplainerError::Status {
            status: status.as_u16(),
            body: text,
        });
    }
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ExplainerError::Format(format!("reply is not JSON: {e}")))?;
    let choices = value
        .get("choices")
        .and_then(|c| c.as_array())
        .ok_or_else(|| ExplainerError::Protocol("choices".into()))?;
    let first = choices
        .first()
        .ok_or_else(|| ExplainerError::Protocol("choices[0]".into()))?;
    let message = first
        .get("message")
        .ok_or_else(|| ExplainerError::Protocol("choices[0].message".into()))?;
    message
        .get("content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| ExplainerError::Protocol("choices[0].message.content".into()))
}

/// Stub reply: the first non-empty user line (wrapped as a concept when
/// the instructions ask for one).
pub fn stub_reply(system_prompt: &str, user_prompt: &str) -> String {
    let first = user_prompt
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("Important tokens:"))
        .unwrap_or("No concept found.");
    if system_prompt.contains("[Concept:") {
        format!("[Concept: {first}]")
    } else {
        first.to_string()
    }
}

fn checked_sentence(reply: String) -> Reply {
    let text = reply.trim();
    if text.is_empty() {
        return Err(ExplainerError::Format("empty reply".into()));
    }
    if text.contains("Description:") {
        return Err(ExplainerError::Format(
            "reply contains a \"Description:\" label".into(),
        ));
    }
    Ok(text.to_string())
}

/// Extracts the body of the first `[Concept: ...]` in a reply.
pub fn parse_concept(reply: &str) -> Reply {
    let start = reply
        .find("[Concept:")
        .ok_or_else(|| ExplainerError::Format("missing [Concept: ...]".into()))?;
    let rest = &reply[start + "[Concept:".len()..];
    let end = rest
        .rfind(']')
        .ok_or_else(|| ExplainerError::Format("unterminated [Concept: ...]".into()))?;
    let body = rest[..end].trim();
    if body.is_empty() {
        return Err(ExplainerError::Format("empty concept".into()));
    }
    Ok(body.to_string())
}
