//! Redundancy subtraction.
//!
//! A sentence embedding `v = f(x)` is refined as
//!
//! ```text
//! v' = v - lambda1 * v_star - lambda2 * v_hat
//! ```
//!
//! where `v_star = f(x*)` encodes the sentence with its keywords masked (so it
//! carries only the trivial words) and `v_hat` is the mean raw embedding of
//! the whole corpus.

use serde::{Deserialize, Serialize};

use crate::encoder::{encode_unique, Encoder};
use crate::error::{Error, Result};
use crate::keyword::{
    partial_mask, select_keywords, Sentence, TfIdfModel, DEFAULT_MASK_RATIO, DEFAULT_MASK_TOKEN,
};
use crate::vecmath::{mean_of, EmbeddingMatrix, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    /// Weight of the sentence-level redundancy `v_star`.
    pub lambda1: f64,
    /// Weight of the corpus-level redundancy `v_hat`.
    pub lambda2: f64,
    pub mask_ratio: f64,
    pub mask_token: String,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            mask_ratio: DEFAULT_MASK_RATIO,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
        }
    }
}

impl RefinementConfig {
    pub fn with_lambdas(&self, lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mask ratio must be in (0, 1], got {}",
                self.mask_ratio
            )));
        }
        if self.mask_token.is_empty() || self.mask_token.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "mask token must be a non-empty single word, got {:?}",
                self.mask_token
            )));
        }
        Ok(())
    }
}

/// The partially masked text `x*` fed to the encoder.
pub fn masked_text(s: &Sentence, m: &TfIdfModel, cfg: &RefinementConfig) -> Result<String> {
    let keywords = select_keywords(s, m, cfg.mask_ratio)?;
    Ok(partial_mask(s, &keywords, &cfg.mask_token)?.text())
}

/// `v_star = f(x*)`.
pub fn sentence_redundancy<E: Encoder + ?Sized>(
    s: &Sentence,
    m: &TfIdfModel,
    cfg: &RefinementConfig,
    h: &E,
) -> Result<EmbeddingVector> {
    let text = masked_text(s, m, cfg)?;
    first(h.encode(&[&text])?)
}

/// `v_hat`: the mean of the raw (unmasked) encodings of the corpus.
pub fn corpus_redundancy<E: Encoder + ?Sized>(corpus: &[Sentence], h: &E) -> Result<EmbeddingVector> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let texts: Vec<&str> = corpus.iter().map(Sentence::raw).collect();
    mean_of(&encode_unique(h, &texts)?)
}

/// `v - lambda1 * v_star - lambda2 * v_hat`, component-wise.
pub fn refine(
    v: &EmbeddingVector,
    v_star: &EmbeddingVector,
    v_hat: &EmbeddingVector,
    cfg: &RefinementConfig,
) -> Result<EmbeddingVector> {
    refine_with(v, v_star, v_hat, cfg.lambda1, cfg.lambda2)
}

pub(crate) fn refine_with(
    v: &EmbeddingVector,
    v_star: &EmbeddingVector,
    v_hat: &EmbeddingVector,
    lambda1: f64,
    lambda2: f64,
) -> Result<EmbeddingVector> {
    for other in [v_star, v_hat] {
        if other.dim() != v.dim() {
            return Err(Error::DimensionMismatch {
                expected: v.dim(),
                got: other.dim(),
            });
        }
    }
    let out = v
        .as_slice()
        .iter()
        .zip(v_star.as_slice())
        .zip(v_hat.as_slice())
        .map(|((a, s), c)| a - lambda1 * s - lambda2 * c)
        .collect();
    EmbeddingVector::new(out)
}

/// λ-independent encodings of a corpus, computed once and reused for any
/// number of `(lambda1, lambda2)` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyBundle {
    raw: Vec<EmbeddingVector>,
    sentence_redundancy: Vec<EmbeddingVector>,
    corpus_redundancy: EmbeddingVector,
}

impl RedundancyBundle {
    /// Encodes every raw sentence and its masked variant in a single encoder
    /// call (each distinct text once).
    pub fn build<E: Encoder + ?Sized>(
        corpus: &[Sentence],
        m: &TfIdfModel,
        cfg: &RefinementConfig,
        h: &E,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        cfg.validate()?;
        let masked: Vec<String> = corpus
            .iter()
            .map(|s| masked_text(s, m, cfg))
            .collect::<Result<_>>()?;
        let texts: Vec<&str> = corpus
            .iter()
            .map(Sentence::raw)
            .chain(masked.iter().map(String::as_str))
            .collect();
        let mut all = encode_unique(h, &texts)?;
        let sentence_redundancy = all.split_off(corpus.len());
        let raw = all;
        let corpus_redundancy = mean_of(&raw)?;
        if sentence_redundancy.iter().any(|v| v.dim() != corpus_redundancy.dim()) {
            return Err(Error::DimMismatch {
                expected: corpus_redundancy.dim(),
                got: sentence_redundancy
                    .iter()
                    .map(EmbeddingVector::dim)
                    .find(|&d| d != corpus_redundancy.dim())
                    .unwrap_or(0),
            });
        }
        Ok(Self {
            raw,
            sentence_redundancy,
            corpus_redundancy,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.corpus_redundancy.dim()
    }

    /// `f(x_i)` in corpus order.
    pub fn raw(&self) -> &[EmbeddingVector] {
        &self.raw
    }

    /// `v_star` of sentence `i`.
    pub fn sentence_redundancy(&self, i: usize) -> &EmbeddingVector {
        &self.sentence_redundancy[i]
    }

    pub fn corpus_redundancy(&self) -> &EmbeddingVector {
        &self.corpus_redundancy
    }

    pub fn raw_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(self.raw.clone()).expect("bundle is non-empty and uniform")
    }

    /// Refined rows for one weight setting, in corpus order.
    pub fn refined(&self, lambda1: f64, lambda2: f64) -> Result<EmbeddingMatrix> {
        let rows = self
            .raw
            .iter()
            .zip(&self.sentence_redundancy)
            .map(|(v, s)| refine_with(v, s, &self.corpus_redundancy, lambda1, lambda2))
            .collect::<Result<_>>()?;
        EmbeddingMatrix::new(rows)
    }
}

pub fn refine_corpus<E: Encoder + ?Sized>(
    corpus: &[Sentence],
    m: &TfIdfModel,
    cfg: &RefinementConfig,
    h: &E,
) -> Result<(EmbeddingMatrix, RedundancyBundle)> {
    let bundle = RedundancyBundle::build(corpus, m, cfg, h)?;
    let refined = bundle.refined(cfg.lambda1, cfg.lambda2)?;
    Ok((refined, bundle))
}

fn first(mut v: Vec<EmbeddingVector>) -> Result<EmbeddingVector> {
    if v.len() != 1 {
        return Err(Error::RemoteUnavailable(format!(
            "encoder returned {} vectors for 1 text",
            v.len()
        )));
    }
    Ok(v.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{token_vector, MockEncoder};
    use crate::keyword::{build_tfidf, tokenize};
    use crate::vecmath::mean_vector;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    fn cfg(l1: f64, l2: f64) -> RefinementConfig {
        RefinementConfig::default().with_lambdas(l1, l2)
    }

    #[test]
    fn refine_examples() {
        let a = v(&[1.0, 0.0]);
        let out = refine(&a, &v(&[0.5, 0.5]), &v(&[0.2, 0.0]), &cfg(1.0, 1.0)).unwrap();
        assert!((out.as_slice()[0] - 0.3).abs() < 1e-15);
        assert_eq!(out.as_slice()[1], -0.5);

        let x = v(&[0.3, -7.1, 2.2]);
        assert_eq!(refine(&x, &v(&[9.0, 9.0, 9.0]), &v(&[1.0, 2.0, 3.0]), &cfg(0.0, 0.0)).unwrap(), x);
        assert_eq!(refine(&x, &x, &x, &cfg(0.5, 0.5)).unwrap(), v(&[0.0, 0.0, 0.0]));

        assert!(matches!(
            refine(&x, &v(&[1.0]), &x, &cfg(1.0, 1.0)),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.5, 1.5).validate().is_ok());
        assert!(cfg(-0.1, 0.0).validate().is_err());
        assert!(cfg(0.0, f64::INFINITY).validate().is_err());
        let mut c = cfg(0.0, 0.0);
        c.mask_ratio = 0.0;
        assert!(c.validate().is_err());
        c.mask_ratio = 0.3;
        c.mask_token = "[ MASK ]".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn sentence_redundancy_masks_keyword() {
        let corpus: Vec<Sentence> = ["the cat sat", "the dog sat", "a bird sat"]
            .iter()
            .map(|t| tokenize(t).unwrap())
            .collect();
        let m = build_tfidf(&corpus).unwrap();
        let enc = MockEncoder::new(6, 0).unwrap();
        let got = sentence_redundancy(&corpus[0], &m, &cfg(0.0, 0.0), &enc).unwrap();
        let want: Vec<f64> = (0..6)
            .map(|i| {
                (token_vector("the", 6, 0)[i]
                    + token_vector("[MASK]", 6, 0)[i]
                    + token_vector("sat", 6, 0)[i])
                    / 3.0
            })
            .collect();
        for (g, w) in got.as_slice().iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn fully_masked_sentences_collide() {
        let a = tokenize("alpha beta").unwrap();
        let b = tokenize("gamma delta").unwrap();
        let m = build_tfidf(&[a.clone(), b.clone()]).unwrap();
        let mut c = cfg(0.0, 0.0);
        c.mask_ratio = 1.0;
        let enc = MockEncoder::new(8, 0).unwrap();
        assert_eq!(
            sentence_redundancy(&a, &m, &c, &enc).unwrap(),
            sentence_redundancy(&b, &m, &c, &enc).unwrap()
        );
    }

    #[test]
    fn corpus_redundancy_is_mean_of_raw() {
        let corpus = vec![tokenize("one two").unwrap(), tokenize("three").unwrap()];
        let enc = MockEncoder::new(5, 1).unwrap();
        let got = corpus_redundancy(&corpus, &enc).unwrap();
        let raw = enc.encode(&["one two", "three"]).unwrap();
        assert_eq!(got, mean_vector(&EmbeddingMatrix::new(raw).unwrap()).unwrap());
        assert_eq!(
            corpus_redundancy(&corpus[..1], &enc).unwrap(),
            enc.encode_one("one two").unwrap()
        );
        assert!(matches!(corpus_redundancy(&[], &enc), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn bundle_refines_in_corpus_order() {
        let corpus: Vec<Sentence> = ["the quick fox", "a lazy dog", "the quick dog"]
            .iter()
            .map(|t| tokenize(t).unwrap())
            .collect();
        let m = build_tfidf(&corpus).unwrap();
        let enc = MockEncoder::new(16, 0).unwrap();
        let c = cfg(0.5, 1.0);
        let (refined, bundle) = refine_corpus(&corpus, &m, &c, &enc).unwrap();
        let v_hat = corpus_redundancy(&corpus, &enc).unwrap();
        assert_eq!(bundle.corpus_redundancy(), &v_hat);
        for (i, s) in corpus.iter().enumerate() {
            let raw = enc.encode_one(s.raw()).unwrap();
            let star = sentence_redundancy(s, &m, &c, &enc).unwrap();
            assert_eq!(refined.row(i), &refine(&raw, &star, &v_hat, &c).unwrap());
        }
        assert_eq!(bundle.refined(0.0, 0.0).unwrap(), bundle.raw_matrix());
        assert!(matches!(
            refine_corpus(&[], &m, &c, &enc),
            Err(Error::EmptyCorpus)
        ));
    }
}
