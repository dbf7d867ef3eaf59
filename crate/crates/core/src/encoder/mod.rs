//! The sentence encoder boundary.
//!
//! The toolkit never runs a neural network itself. Embeddings come from one
//! of three backends behind [`Encoder`]: a deterministic hash-based mock, a
//! precomputed JSONL store, or a remote HTTP service.

mod cache;
mod mock;
mod remote;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

pub use cache::{content_hash, EmbeddingCache, CACHE_FORMAT, CACHE_VERSION};
pub use mock::{fnv1a64, mock_tokens, token_vector, unit_interval, MockEncoder, SplitMix64};
pub use remote::{RemoteConfig, RemoteEncoder};

use crate::error::{Error, Result};
use crate::vecmath::EmbeddingVector;

pub trait Encoder {
    /// Output dimension, if already known.
    fn dim(&self) -> Option<usize>;

    /// One vector per text, in input order.
    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

impl<E: Encoder + ?Sized> Encoder for &E {
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        (**self).encode(texts)
    }
}

/// Encodes each distinct text once and fans the results back out.
pub fn encode_unique<E: Encoder + ?Sized>(enc: &E, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut unique: Vec<&str> = Vec::new();
    let slots: Vec<usize> = texts
        .iter()
        .map(|&t| {
            *index.entry(t).or_insert_with(|| {
                unique.push(t);
                unique.len() - 1
            })
        })
        .collect();
    let vectors = enc.encode(&unique)?;
    if vectors.len() != unique.len() {
        return Err(Error::RemoteUnavailable(format!(
            "encoder returned {} vectors for {} texts",
            vectors.len(),
            unique.len()
        )));
    }
    Ok(slots.into_iter().map(|i| vectors[i].clone()).collect())
}

/// Serves embeddings from a precomputed store.
#[derive(Debug, Clone)]
pub struct FileEncoder {
    path: PathBuf,
    store: EmbeddingCache,
}

impl FileEncoder {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            store: EmbeddingCache::load(path)?,
        })
    }

    pub fn from_cache(store: EmbeddingCache) -> Self {
        Self {
            path: PathBuf::new(),
            store,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Encoder for FileEncoder {
    fn dim(&self) -> Option<usize> {
        Some(self.store.dim())
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        texts
            .iter()
            .map(|t| {
                let hash = content_hash(t);
                self.store
                    .get_by_hash(&hash)
                    .cloned()
                    .ok_or(Error::MissingEmbedding { hash })
            })
            .collect()
    }
}

/// Memoizes another encoder. Reads share the lock; misses are encoded in one
/// batch and written under the exclusive lock.
#[derive(Debug)]
pub struct CachingEncoder<E> {
    inner: E,
    cache: RwLock<Option<EmbeddingCache>>,
}

impl<E: Encoder> CachingEncoder<E> {
    pub fn new(inner: E) -> Self {
        let cache = inner.dim().map(EmbeddingCache::new);
        Self {
            inner,
            cache: RwLock::new(cache),
        }
    }

    pub fn with_cache(inner: E, cache: EmbeddingCache) -> Self {
        Self {
            inner,
            cache: RwLock::new(Some(cache)),
        }
    }

    pub fn into_cache(self) -> Option<EmbeddingCache> {
        self.cache.into_inner().expect("cache lock poisoned")
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Encoder> Encoder for CachingEncoder<E> {
    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut missing: Vec<&str> = {
            let guard = self.cache.read().expect("cache lock poisoned");
            texts
                .iter()
                .copied()
                .filter(|t| guard.as_ref().and_then(|c| c.get(t)).is_none())
                .collect()
        };
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let fresh = self.inner.encode(&missing)?;
            let mut guard = self.cache.write().expect("cache lock poisoned");
            let dim = fresh.first().map(EmbeddingVector::dim).unwrap_or(1);
            let cache = guard.get_or_insert_with(|| EmbeddingCache::new(dim));
            for (t, v) in missing.iter().zip(fresh) {
                cache.insert(t, v)?;
            }
        }
        let guard = self.cache.read().expect("cache lock poisoned");
        let cache = guard.as_ref().expect("populated above");
        Ok(texts
            .iter()
            .map(|t| cache.get(t).cloned().expect("populated above"))
            .collect())
    }
}

/// A configured encoder backend.
#[derive(Debug)]
pub enum EncoderHandle {
    Mock(MockEncoder),
    File(FileEncoder),
    Remote(RemoteEncoder),
}

impl EncoderHandle {
    /// Parses `mock[:dim[:salt]]`, `file:<path>` or `http:<url>`
    /// (a bare `http://` / `https://` URL is accepted too).
    pub fn from_spec(spec: &str, remote_timeout: Option<std::time::Duration>) -> Result<Self> {
        let bad = |reason: &str| Error::BadEncoderSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        if spec == "mock" || spec.starts_with("mock:") {
            let mut parts = spec.split(':').skip(1);
            let dim = match parts.next() {
                Some(d) => d.parse().map_err(|_| bad("dim must be a positive integer"))?,
                None => MockEncoder::DEFAULT_DIM,
            };
            let salt = match parts.next() {
                Some(s) => s.parse().map_err(|_| bad("salt must be an unsigned integer"))?,
                None => 0,
            };
            if parts.next().is_some() {
                return Err(bad("expected mock[:dim[:salt]]"));
            }
            return Ok(Self::Mock(MockEncoder::new(dim, salt).map_err(|_| bad("dim must be >= 1"))?));
        }
        if let Some(path) = spec.strip_prefix("file:") {
            if path.is_empty() {
                return Err(bad("missing path"));
            }
            return Ok(Self::File(FileEncoder::open(Path::new(path))?));
        }
        let url = if spec.starts_with("http://") || spec.starts_with("https://") {
            spec
        } else if let Some(rest) = spec.strip_prefix("http:") {
            rest
        } else {
            return Err(bad("expected mock[:dim[:salt]], file:<path> or http:<url>"));
        };
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(bad("remote URL must start with http:// or https://"));
        }
        let mut cfg = RemoteConfig::new(url);
        if let Some(t) = remote_timeout {
            cfg.timeout = t;
        }
        Ok(Self::Remote(RemoteEncoder::new(cfg)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Mock(_) => "mock",
            Self::File(_) => "file",
            Self::Remote(_) => "remote",
        }
    }
}

impl fmt::Display for EncoderHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mock(m) => write!(f, "mock:{}:{}", m.dim().unwrap_or(0), m.salt()),
            Self::File(e) => write!(f, "file:{}", e.path().display()),
            Self::Remote(r) => write!(f, "http:{}", r.config().base_url),
        }
    }
}

impl Encoder for EncoderHandle {
    fn dim(&self) -> Option<usize> {
        match self {
            Self::Mock(e) => e.dim(),
            Self::File(e) => e.dim(),
            Self::Remote(e) => e.dim(),
        }
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        match self {
            Self::Mock(e) => e.encode(texts),
            Self::File(e) => e.encode(texts),
            Self::Remote(e) => e.encode(texts),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Counting<'a> {
        inner: MockEncoder,
        calls: &'a Cell<usize>,
    }

    impl Encoder for Counting<'_> {
        fn dim(&self) -> Option<usize> {
            self.inner.dim()
        }

        fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
            self.calls.set(self.calls.get() + texts.len());
            self.inner.encode(texts)
        }
    }

    #[test]
    fn spec_parsing() {
        let h = EncoderHandle::from_spec("mock", None).unwrap();
        assert_eq!(h.dim(), Some(64));
        assert_eq!(h.to_string(), "mock:64:0");
        let h = EncoderHandle::from_spec("mock:8:5", None).unwrap();
        assert_eq!(h.to_string(), "mock:8:5");
        for bad in ["mock:0", "mock:x", "mock:8:1:2", "file:", "ftp://x", "http:localhost", "tfidf"] {
            assert!(
                matches!(EncoderHandle::from_spec(bad, None), Err(Error::BadEncoderSpec { .. })),
                "{bad}"
            );
        }
        let h = EncoderHandle::from_spec("http:http://127.0.0.1:9/", None).unwrap();
        assert_eq!(h.kind(), "remote");
        assert_eq!(h.dim(), None);
        let h = EncoderHandle::from_spec("https://example.invalid", None).unwrap();
        assert_eq!(h.kind(), "remote");
    }

    #[test]
    fn file_encoder_lookup() {
        let mock = MockEncoder::new(4, 0).unwrap();
        let mut store = EmbeddingCache::new(4);
        store.insert("a dog", mock.encode_one("a dog").unwrap()).unwrap();
        let enc = FileEncoder::from_cache(store);
        assert_eq!(enc.encode(&["a dog"]).unwrap()[0], mock.encode_one("a dog").unwrap());
        match enc.encode(&["a dog", "a cat"]) {
            Err(Error::MissingEmbedding { hash }) => assert_eq!(hash, content_hash("a cat")),
            other => panic!("expected MissingEmbedding, got {other:?}"),
        }
        assert!(matches!(enc.encode(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn caching_encoder_encodes_once() {
        let calls = Cell::new(0);
        let enc = CachingEncoder::new(Counting {
            inner: MockEncoder::new(4, 0).unwrap(),
            calls: &calls,
        });
        let a = enc.encode(&["x y", "z", "x y"]).unwrap();
        assert_eq!(calls.get(), 2);
        let b = enc.encode(&["z", "x y"]).unwrap();
        assert_eq!(calls.get(), 2);
        assert_eq!(a[1], b[0]);
        assert_eq!(a[0], a[2]);
        assert_eq!(enc.into_cache().unwrap().len(), 2);
    }

    #[test]
    fn encode_unique_preserves_order() {
        let calls = Cell::new(0);
        let enc = Counting {
            inner: MockEncoder::new(4, 0).unwrap(),
            calls: &calls,
        };
        let out = encode_unique(&enc, &["b", "a", "b", "c", "a"]).unwrap();
        assert_eq!(calls.get(), 3);
        let direct = enc.inner.encode(&["b", "a", "b", "c", "a"]).unwrap();
        assert_eq!(out, direct);
    }
}
