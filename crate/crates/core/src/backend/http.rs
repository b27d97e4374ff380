//! Client for the canonical scoring endpoint.
//!
//! `POST {base_url}/score` with `{"model", "conditioning", "target"}`;
//! the server answers `{"model", "tokens", "logprobs"}`. Anything other than
//! a 200 with a well-formed body is an error.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, ScoreRequest, ScoringBackend, TokenProbSeries};

pub const TOKEN_ENV: &str = "FFLM_BACKEND_TOKEN";

#[derive(Debug, Serialize)]
pub struct WireRequest<'a> {
    pub model: &'a str,
    pub conditioning: &'a str,
    pub target: &'a str,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub model: String,
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

pub struct HttpBackend {
    endpoint: String,
    bearer: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the bearer token from `FFLM_BACKEND_TOKEN` when set.
    pub fn new(base_url: &str) -> Self {
        let bearer = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Self::with_token(base_url, bearer)
    }

    pub fn with_token(base_url: &str, bearer: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(600))
            .build();
        Self {
            endpoint: format!("{}/score", base_url.trim_end_matches('/')),
            bearer,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Validates a decoded response body into a series.
pub fn decode_response(body: &str) -> Result<TokenProbSeries, BackendError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::ProtocolViolation(format!("malformed response body: {e}")))?;
    TokenProbSeries::new(wire.tokens, wire.logprobs)
}

impl ScoringBackend for HttpBackend {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        request.validate()?;
        let body = WireRequest {
            model: &request.model_id,
            conditioning: &request.conditioning,
            target: &request.target,
        };
        let mut call = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let payload = serde_json::to_string(&body)
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let response = match call.send_string(&payload) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                return Err(BackendError::Status {
                    status,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(BackendError::Unreachable(format!("{}: {t}", self.endpoint)))
            }
        };
        if response.status() != 200 {
            return Err(BackendError::Status {
                status: response.status(),
                body: response.into_string().unwrap_or_default(),
            });
        }
        let text = response
            .into_string()
            .map_err(|e| BackendError::Unreachable(format!("reading response: {e}")))?;
        decode_response(&text)
    }
}
