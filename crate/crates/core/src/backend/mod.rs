//! Scoring-backend contract.
//!
//! A backend takes optional conditioning text plus a target text and returns
//! the target's tokens with one natural-log probability per token, computed
//! under teacher forcing. Three implementations live here: an HTTP client
//! ([`http::HttpBackend`]), a JSON-lines replay store
//! ([`replay::CachedBackend`]), and a deterministic pseudo-LM
//! ([`synthetic::SyntheticBackend`]) used as a test oracle.

pub mod http;
pub mod replay;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::HttpBackend;
pub use replay::{cache_lookup_or_fetch, CachedBackend, ReplayRecord, ReplayStore, StoreMode};
pub use synthetic::{synthetic_score, SyntheticBackend};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("replay miss for key {key}")]
    ReplayMiss { key: String },
    #[error("replay store {}: {message}", line.map(|l| format!("line {l}")).unwrap_or_else(|| "io".into()))]
    StoreIo {
        line: Option<usize>,
        message: String,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// One teacher-forced scoring call: `target` conditioned on `conditioning`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub conditioning: String,
    pub target: String,
    pub model_id: String,
}

impl ScoreRequest {
    pub fn new(
        conditioning: impl Into<String>,
        target: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Result<Self, BackendError> {
        let request = Self {
            conditioning: conditioning.into(),
            target: target.into(),
            model_id: model_id.into(),
        };
        request.validate()?;
        Ok(request)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.target.trim().is_empty() {
            return Err(BackendError::InvalidRequest(
                "target is empty after whitespace normalization".into(),
            ));
        }
        Ok(())
    }

    /// Byte-stable encoding: a version tag, then each field as a
    /// little-endian u64 length followed by its UTF-8 bytes, in the order
    /// model_id, conditioning, target.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        const TAG: &[u8] = b"fflm.score-request.v1";
        let fields = [&self.model_id, &self.conditioning, &self.target];
        let mut out =
            Vec::with_capacity(TAG.len() + fields.iter().map(|f| f.len() + 8).sum::<usize>());
        out.extend_from_slice(TAG);
        for field in fields {
            out.extend_from_slice(&(field.len() as u64).to_le_bytes());
            out.extend_from_slice(field.as_bytes());
        }
        out
    }

    /// Hex SHA-256 of [`Self::canonical_bytes`]; the replay-store key.
    pub fn cache_key(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }
}

/// Tokens of a scored target with their natural-log probabilities.
///
/// Construction enforces `tokens.len() == logprobs.len() >= 1` and that every
/// logprob is finite and `<= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct TokenProbSeries {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSeries {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TryFrom<RawSeries> for TokenProbSeries {
    type Error = BackendError;

    fn try_from(raw: RawSeries) -> Result<Self, Self::Error> {
        Self::new(raw.tokens, raw.logprobs)
    }
}

impl TokenProbSeries {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self, BackendError> {
        if tokens.len() != logprobs.len() {
            return Err(BackendError::ProtocolViolation(format!(
                "{} tokens but {} logprobs",
                tokens.len(),
                logprobs.len()
            )));
        }
        if tokens.is_empty() {
            return Err(BackendError::ProtocolViolation("empty token series".into()));
        }
        if let Some((i, lp)) = logprobs
            .iter()
            .enumerate()
            .find(|(_, lp)| !lp.is_finite() || **lp > 0.0)
        {
            return Err(BackendError::ProtocolViolation(format!(
                "logprob {lp} at position {i} is not a finite value <= 0"
            )));
        }
        Ok(Self { tokens, logprobs })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A source of teacher-forced per-token log probabilities.
pub trait ScoringBackend: Send + Sync {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError>;

    /// Token count used for context-budget accounting. The default counts
    /// whitespace-delimited words, which is exact for the synthetic backend
    /// and an approximation for real subword tokenizers.
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        (**self).score(request)
    }

    fn count_tokens(&self, text: &str) -> usize {
        (**self).count_tokens(text)
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for &B {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        (**self).score(request)
    }

    fn count_tokens(&self, text: &str) -> usize {
        (**self).count_tokens(text)
    }
}

/// Forwards to an inner backend, counting calls.
pub struct CountingBackend<B> {
    inner: B,
    calls: std::sync::atomic::AtomicUsize,
}

impl<B: ScoringBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl<B: ScoringBackend> ScoringBackend for CountingBackend<B> {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        self.calls
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.inner.score(request)
    }

    fn count_tokens(&self, text: &str) -> usize {
        self.inner.count_tokens(text)
    }
}

/// Validates `request` and scores it on `backend`.
pub fn score_target(
    request: &ScoreRequest,
    backend: &dyn ScoringBackend,
) -> Result<TokenProbSeries, BackendError> {
    request.validate()?;
    backend.score(request)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn empty_target_is_rejected() {
        assert!(matches!(
            ScoreRequest::new("ctx", " \n\t", "m"),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn series_rejects_length_mismatch() {
        let err = TokenProbSeries::new(vec!["a".into(), "b".into()], vec![-0.1]).unwrap_err();
        assert!(matches!(err, BackendError::ProtocolViolation(_)));
    }

    #[test]
    fn series_rejects_positive_and_non_finite() {
        for bad in [0.1, f64::NAN, f64::NEG_INFINITY] {
            assert!(
                TokenProbSeries::new(vec!["a".into()], vec![bad]).is_err(),
                "{bad}"
            );
        }
        assert!(TokenProbSeries::new(vec!["a".into()], vec![0.0]).is_ok());
    }

    #[test]
    fn series_deserialization_validates() {
        let bad = r#"{"tokens":["a","b"],"logprobs":[-0.1]}"#;
        assert!(serde_json::from_str::<TokenProbSeries>(bad).is_err());
        let good = r#"{"tokens":["a"],"logprobs":[-0.1]}"#;
        assert_eq!(
            serde_json::from_str::<TokenProbSeries>(good).unwrap().len(),
            1
        );
    }

    #[test]
    fn canonical_bytes_are_length_prefixed() {
        // Shifting a boundary between fields must change the key.
        let a = ScoreRequest::new("ab", "c", "m").unwrap();
        let b = ScoreRequest::new("a", "bc", "m").unwrap();
        assert_ne!(a.canonical_bytes(), b.canonical_bytes());
        assert_ne!(a.cache_key(), b.cache_key());
        assert_eq!(a.cache_key(), a.clone().cache_key());
        assert_eq!(a.cache_key().len(), 64);
    }

    #[test]
    fn cache_keys_do_not_collide() {
        let mut seen = HashSet::new();
        for i in 0..10_000u32 {
            let req = ScoreRequest::new(
                if i % 3 == 0 {
                    String::new()
                } else {
                    format!("doc {}", i / 3)
                },
                format!("summary {}", i % 97),
                format!("model-{}", i % 5),
            )
            .unwrap();
            seen.insert(req.cache_key());
        }
        // Distinct requests: (conditioning, target, model) triples vary jointly.
        let distinct: HashSet<_> = (0..10_000u32)
            .map(|i| (if i % 3 == 0 { u32::MAX } else { i / 3 }, i % 97, i % 5))
            .collect();
        assert_eq!(seen.len(), distinct.len());
    }
}
