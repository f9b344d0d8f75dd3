//! Blocking client for the admin API.

use std::fmt;
use std::time::Duration;

use serde_json::Value;

pub const DEFAULT_API: &str = "http://127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq)]
pub struct ClientError(pub String);

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ClientError {}

#[derive(Debug, Clone)]
pub struct ApiResponse {
    pub status: u16,
    pub body: String,
}

impl ApiResponse {
    pub fn ok(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn json(&self) -> Option<Value> {
        serde_json::from_str(&self.body).ok()
    }

    /// `message` of an `{"error": ...}` body, or the raw body.
    pub fn error_message(&self) -> String {
        let detail = self
            .json()
            .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
            .unwrap_or_else(|| self.body.trim().to_string());
        format!("HTTP {}: {detail}", self.status)
    }
}

pub struct ApiClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(base: &str, token: Option<String>, timeout: Duration) -> Self {
        ApiClient {
            base: base.trim_end_matches('/').to_string(),
            token,
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .timeout_global(Some(timeout))
                .build()
                .into(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn auth(&self) -> String {
        self.token.as_deref().map(|t| format!("Bearer {t}")).unwrap_or_default()
    }

    fn finish(&self, r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<ApiResponse, ClientError> {
        let mut resp = r.map_err(|e| ClientError(format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError(format!("bad response from {}: {e}", self.base)))?;
        Ok(ApiResponse { status, body })
    }

    pub fn get(&self, path: &str) -> Result<ApiResponse, ClientError> {
        let url = format!("{}{path}", self.base);
        self.finish(self.agent.get(&url).header("Authorization", self.auth()).call())
    }

    pub fn delete(&self, path: &str) -> Result<ApiResponse, ClientError> {
        let url = format!("{}{path}", self.base);
        self.finish(self.agent.delete(&url).header("Authorization", self.auth()).call())
    }

    pub fn put(&self, path: &str, content_type: &str, body: String) -> Result<ApiResponse, ClientError> {
        let url = format!("{}{path}", self.base);
        let req = self.agent.put(&url).header("Authorization", self.auth()).header("Content-Type", content_type);
        self.finish(req.send(body))
    }

    pub fn post(&self, path: &str, content_type: &str, body: String) -> Result<ApiResponse, ClientError> {
        let url = format!("{}{path}", self.base);
        let req = self.agent.post(&url).header("Authorization", self.auth()).header("Content-Type", content_type);
        self.finish(req.send(body))
    }
}
