//! Content-addressed embedding store persisted as JSON Lines.
//!
//! ```text
//! {"format":"repal-cache","version":1,"dim":3}
//! {"hash":"<sha256 hex of the UTF-8 text>","text":"a dog","vector":[0.1,0.2,0.3]}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::vecmath::EmbeddingVector;

pub const CACHE_FORMAT: &str = "repal-cache";
pub const CACHE_VERSION: u32 = 1;

/// Lowercase hex SHA-256 of the exact UTF-8 bytes of `text`.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    hash: String,
    text: String,
    vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    text: String,
    vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    dim: usize,
    entries: BTreeMap<String, Entry>,
}

impl EmbeddingCache {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "cache dimension must be positive");
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, text: &str, vector: EmbeddingVector) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        self.entries.insert(
            content_hash(text),
            Entry {
                text: text.to_string(),
                vector,
            },
        );
        Ok(())
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.get_by_hash(&content_hash(text))
    }

    pub fn get_by_hash(&self, hash: &str) -> Option<&EmbeddingVector> {
        self.entries.get(hash).map(|e| &e.vector)
    }

    /// Entries as `(text, vector)`, ordered by hash.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.values().map(|e| (e.text.as_str(), &e.vector))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = Header {
            format: CACHE_FORMAT.to_string(),
            version: CACHE_VERSION,
            dim: self.dim,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (hash, e) in &self.entries {
            let rec = Record {
                hash: hash.clone(),
                text: e.text.clone(),
                vector: e.vector.as_slice().to_vec(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::CacheFormat { line, reason };
        let mut lines = r.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| bad(1, e.to_string()))?;
                serde_json::from_str(&line).map_err(|e| bad(1, format!("bad header: {e}")))?
            }
            None => return Err(bad(1, "missing header".into())),
        };
        if header.format != CACHE_FORMAT || header.version != CACHE_VERSION {
            return Err(bad(
                1,
                format!("unsupported format {:?} version {}", header.format, header.version),
            ));
        }
        if header.dim == 0 {
            return Err(bad(1, "dim must be positive".into()));
        }
        let mut cache = Self::new(header.dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| bad(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| bad(lineno, e.to_string()))?;
            if rec.hash != content_hash(&rec.text) {
                return Err(bad(lineno, "hash does not match text".into()));
            }
            let vector = EmbeddingVector::new(rec.vector).map_err(|e| bad(lineno, e.to_string()))?;
            cache
                .insert(&rec.text, vector)
                .map_err(|e| bad(lineno, e.to_string()))?;
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            content_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(content_hash("").len(), 64);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut c = EmbeddingCache::new(3);
        c.insert("a dog", v(&[0.1, -1.0 / 3.0, 1e-300])).unwrap();
        c.insert("ünïcode \"quoted\"\n", v(&[f64::MAX, f64::MIN_POSITIVE, -0.0]))
            .unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"format":"repal-cache","version":1,"dim":3}"#));
        assert_eq!(text.lines().count(), 3);
        let back = EmbeddingCache::read_from(&buf[..]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_files() {
        let err = |s: &str| EmbeddingCache::read_from(s.as_bytes()).unwrap_err();
        assert!(matches!(err(""), Error::CacheFormat { line: 1, .. }));
        assert!(matches!(
            err(r#"{"format":"other","version":1,"dim":2}"#),
            Error::CacheFormat { line: 1, .. }
        ));
        let header = r#"{"format":"repal-cache","version":1,"dim":2}"#;
        let rec = format!(
            r#"{{"hash":"{}","text":"x","vector":[1.0]}}"#,
            content_hash("x")
        );
        assert!(matches!(
            err(&format!("{header}\n{rec}")),
            Error::CacheFormat { line: 2, .. }
        ));
        let forged = r#"{"hash":"00","text":"x","vector":[1.0,2.0]}"#;
        assert!(matches!(
            err(&format!("{header}\n{forged}")),
            Error::CacheFormat { line: 2, .. }
        ));
    }

    #[test]
    fn insert_checks_dim() {
        let mut c = EmbeddingCache::new(2);
        assert!(matches!(
            c.insert("x", v(&[1.0])),
            Err(Error::DimMismatch { expected: 2, got: 1 })
        ));
        c.insert("x", v(&[1.0, 2.0])).unwrap();
        assert_eq!(c.get("x"), Some(&v(&[1.0, 2.0])));
        assert_eq!(c.get("y"), None);
    }
}
