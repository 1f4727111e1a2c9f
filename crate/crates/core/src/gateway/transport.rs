use std::time::Duration;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub bearer: Option<String>,
    pub body: Value,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
        }
    }
}

/// Connection-level failure: no HTTP status was received.
#[derive(Debug, Clone, thiserror::Error)]
#[error("network error: {0}")]
pub struct NetworkError(pub String);

/// Moves one JSON request to a provider and returns the raw reply.
pub trait Transport: Send + Sync {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, NetworkError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| NetworkError(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let mut req = self
            .client
            .post(&request.url)
            .timeout(request.timeout)
            .json(&request.body);
        if let Some(token) = &request.bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| NetworkError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| NetworkError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}
