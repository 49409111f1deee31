use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{MtError, Provider};

pub const DEFAULT_KEY_HEADER: &str = "Ocp-Apim-Subscription-Key";

/// Wire format of the translation endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RequestStyle {
    /// `from`/`to` query parameters, body `[{"Text": ..}]`, response
    /// `[{"translations": [{"text": ..}]}]`.
    Azure,
    /// Body `{"<texts_field>": [..], "source": .., "target": ..}`; the
    /// translations are the string array at JSON pointer `response_pointer`.
    Generic {
        texts_field: String,
        response_pointer: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub api_key_header: String,
    pub style: RequestStyle,
    pub batch_size: usize,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub concurrency: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key: None,
            api_key_header: DEFAULT_KEY_HEADER.into(),
            style: RequestStyle::Azure,
            batch_size: 100,
            max_attempts: 3,
            backoff_ms: 500,
            timeout_ms: 30_000,
            concurrency: 4,
        }
    }
}

impl HttpConfig {
    /// Fill endpoint, key and key header from `MT_ENDPOINT`, `MT_API_KEY`
    /// and `MT_API_KEY_HEADER` where set.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var("MT_ENDPOINT") {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var("MT_API_KEY") {
            self.api_key = Some(v);
        }
        if let Ok(v) = std::env::var("MT_API_KEY_HEADER") {
            self.api_key_header = v;
        }
        self
    }
}

pub struct HttpProvider {
    cfg: HttpConfig,
    client: Client,
}

fn is_transient(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self, MtError> {
        if cfg.endpoint.is_empty() {
            return Err(MtError::ProviderUnavailable(
                "no endpoint configured (MT_ENDPOINT)".into(),
            ));
        }
        if cfg.api_key.as_deref().map_or(true, str::is_empty) {
            return Err(MtError::AuthError(
                "no API key configured (MT_API_KEY)".into(),
            ));
        }
        if cfg.batch_size == 0 || cfg.batch_size > 100 || cfg.max_attempts == 0 {
            return Err(MtError::InvalidRequest(
                "batch_size must be in 1..=100 and max_attempts at least 1".into(),
            ));
        }
        let client = Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| MtError::ProviderUnavailable(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    fn send_once(&self, texts: &[String], src: &str, tgt: &str) -> Result<Vec<String>, Attempt> {
        let key = self.cfg.api_key.as_deref().unwrap_or_default();
        let req = self
            .client
            .post(&self.cfg.endpoint)
            .header(&self.cfg.api_key_header, key);
        let req = match &self.cfg.style {
            RequestStyle::Azure => req
                .query(&[("api-version", "3.0"), ("from", src), ("to", tgt)])
                .json(
                    &texts
                        .iter()
                        .map(|t| json!({ "Text": t }))
                        .collect::<Vec<_>>(),
                ),
            RequestStyle::Generic { texts_field, .. } => {
                req.json(&json!({ texts_field.as_str(): texts, "source": src, "target": tgt }))
            }
        };
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Attempt::Fatal(MtError::AuthError(format!(
                "endpoint answered {status}"
            ))));
        }
        if is_transient(status) {
            return Err(Attempt::Retry(format!("endpoint answered {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(MtError::ProviderUnavailable(format!(
                "endpoint answered {status}"
            ))));
        }
        let body: Value = resp.json().map_err(|e| {
            Attempt::Fatal(MtError::ProviderUnavailable(format!("bad response: {e}")))
        })?;
        parse_response(&self.cfg.style, &body).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(String),
    Fatal(MtError),
}

fn parse_response(style: &RequestStyle, body: &Value) -> Result<Vec<String>, MtError> {
    let bad = || MtError::ProviderUnavailable(format!("unexpected response shape: {body}"));
    match style {
        RequestStyle::Azure => body
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|item| {
                item.pointer("/translations/0/text")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(bad)
            })
            .collect(),
        RequestStyle::Generic {
            response_pointer, ..
        } => body
            .pointer(response_pointer)
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(bad))
            .collect(),
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn max_batch(&self) -> usize {
        self.cfg.batch_size
    }

    fn concurrency(&self) -> usize {
        self.cfg.concurrency.max(1)
    }

    fn translate_batch(
        &self,
        texts: &[String],
        src: &str,
        tgt: &str,
    ) -> Result<Vec<String>, MtError> {
        let mut last = String::new();
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            match self.send_once(texts, src, tgt) {
                Ok(out) => return Ok(out),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => last = reason,
            }
        }
        Err(MtError::ProviderUnavailable(format!(
            "gave up after {} attempts: {last}",
            self.cfg.max_attempts
        )))
    }
}
