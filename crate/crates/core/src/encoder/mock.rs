//! Deterministic hash-based encoder for tests and desk-scale experiments.
//!
//! Each token maps to a pseudo-random vector seeded by its FNV-1a hash; a
//! sentence is the mean of its token vectors. Shared words therefore inject
//! a shared component into every sentence that contains them.

use crate::error::{Error, Result};
use crate::keyword::tokenize;
use crate::vecmath::EmbeddingVector;

use super::Encoder;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// The splitmix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Maps a 64-bit value onto `[-1, 1)` as `u / 2^63 - 1`.
pub fn unit_interval(u: u64) -> f64 {
    u as f64 / 9_223_372_036_854_775_808.0 - 1.0
}

/// The mock vector of one token: `dim` successive splitmix64 outputs seeded
/// with `fnv1a64(token) ^ salt`, each mapped through [`unit_interval`].
pub fn token_vector(token: &str, dim: usize, salt: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(fnv1a64(token.as_bytes()) ^ salt);
    (0..dim).map(|_| unit_interval(rng.next_u64())).collect()
}

/// `[MASK]`-style or `<mask>`-style literal.
fn is_special_token(chunk: &str) -> bool {
    let bracketed = |open: char, close: char| {
        chunk.len() > 2
            && chunk.starts_with(open)
            && chunk.ends_with(close)
            && !chunk[1..chunk.len() - 1].contains([open, close])
    };
    bracketed('[', ']') || bracketed('<', '>')
}

/// Tokens the mock encoder sees.
///
/// Whitespace-separated special literals such as `[MASK]` or `<mask>` are
/// kept verbatim; everything else goes through [`tokenize`] and is lowercased.
pub fn mock_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_special_token(chunk) {
            out.push(chunk.to_string());
        } else if let Ok(s) = tokenize(chunk) {
            out.extend(s.tokens().iter().map(|t| t.norm.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEncoder {
    dim: usize,
    salt: u64,
}

impl MockEncoder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize, salt: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("mock encoder dim must be >= 1".into()));
        }
        Ok(Self { dim, salt })
    }

    pub fn salt(&self) -> u64 {
        self.salt
    }

    pub fn encode_one(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = mock_tokens(text);
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = vec![0.0; self.dim];
        for t in &tokens {
            for (a, v) in acc.iter_mut().zip(token_vector(t, self.dim, self.salt)) {
                *a += v;
            }
        }
        let n = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        EmbeddingVector::new(acc)
    }
}

impl Encoder for MockEncoder {
    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        texts.iter().map(|t| self.encode_one(t)).collect()
    }
}
