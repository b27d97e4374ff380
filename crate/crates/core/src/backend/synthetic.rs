//! Deterministic pseudo-LM.
//!
//! Targets are tokenized on whitespace. Each target token `t` gets
//!
//! ```text
//! logprob(t) = min(base + boost, -0.05)
//! base       = -3.0 + 2.5 * u,   u = hash64(seed, window, t) / 2^64
//! boost      = 1.5 if t (case-folded) is a token of the conditioning, else 0
//! ```
//!
//! where `window` is the last 8 tokens of conditioning followed by the
//! already-scored target prefix. Token reconstruction: the tokens joined by
//! single spaces equal the target with whitespace runs collapsed.

use std::collections::HashSet;

use super::{BackendError, ScoreRequest, ScoringBackend, TokenProbSeries};

pub const WINDOW: usize = 8;
pub const BASE_OFFSET: f64 = -3.0;
pub const BASE_SPAN: f64 = 2.5;
pub const BOOST: f64 = 1.5;
pub const CEILING: f64 = -0.05;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const UNIT_SEP: u8 = 0x1f;
const RECORD_SEP: u8 = 0x1e;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticBackend {
    pub seed: u64,
}

impl SyntheticBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl ScoringBackend for SyntheticBackend {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        request.validate()?;
        Ok(synthetic_score(request, self.seed))
    }
}

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

// FNV-1a leaves the high bits poorly mixed for short inputs; finish with
// the murmur3 64-bit avalanche so `u` is close to uniform.
fn avalanche(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// 64-bit hash of (seed, context window, token).
pub fn hash64(seed: u64, window: &[&str], token: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    for w in window {
        h = fnv1a(h, w.as_bytes());
        h = fnv1a(h, &[UNIT_SEP]);
    }
    h = fnv1a(h, &[RECORD_SEP]);
    h = fnv1a(h, token.as_bytes());
    avalanche(h)
}

/// Maps a hash to `[0, 1)`.
pub fn unit_interval(hash: u64) -> f64 {
    // Top 53 bits give an exactly representable dyadic fraction.
    (hash >> 11) as f64 / (1u64 << 53) as f64
}

/// The per-token formula, split out so tests can hit each branch.
pub fn token_logprob(u: f64, boosted: bool) -> f64 {
    let base = BASE_OFFSET + BASE_SPAN * u;
    let boost = if boosted { BOOST } else { 0.0 };
    (base + boost).min(CEILING)
}

pub fn synthetic_score(request: &ScoreRequest, seed: u64) -> TokenProbSeries {
    let cond_tokens: Vec<&str> = request.conditioning.split_whitespace().collect();
    let vocabulary: HashSet<String> = cond_tokens.iter().map(|t| t.to_lowercase()).collect();
    let target_tokens: Vec<&str> = request.target.split_whitespace().collect();

    let mut context = cond_tokens;
    let mut logprobs = Vec::with_capacity(target_tokens.len());
    for &token in &target_tokens {
        let start = context.len().saturating_sub(WINDOW);
        let u = unit_interval(hash64(seed, &context[start..], token));
        logprobs.push(token_logprob(u, vocabulary.contains(&token.to_lowercase())));
        context.push(token);
    }

    let tokens = target_tokens.into_iter().map(str::to_owned).collect();
    TokenProbSeries::new(tokens, logprobs)
        .expect("synthetic series has one finite non-positive logprob per token")
}
