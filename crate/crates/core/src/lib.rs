//! Training-free refinement of sentence embeddings.
//!
//! A sentence embedding from any unsupervised encoder is refined by
//! subtracting two redundant components:
//!
//! - the embedding of the sentence with its keywords masked, which carries
//!   only the trivial (non-keyword) words, and
//! - the mean embedding of the corpus, which every sentence shares.
//!
//! ```text
//! v' = f(x) - lambda1 * f(x*) - lambda2 * mean_j f(x_j)
//! ```
//!
//! The crate also ships the evaluation harness (Spearman correlation on
//! scored sentence pairs, grid search over the two weights, ablations) and a
//! set of diagnostics: per-word importance, the redundancy overlap ratio, a
//! spectral sweep of the refined embedding matrix and a whitening baseline.
//!
//! Encoders are external. [`encoder::MockEncoder`] is a deterministic
//! hash-based stand-in, [`encoder::FileEncoder`] serves precomputed vectors,
//! and [`encoder::RemoteEncoder`] talks to an embedding service over HTTP.

pub mod diagnose;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod keyword;
pub mod refine;
pub mod synthetic;
pub mod vecmath;

pub use encoder::{Encoder, EncoderHandle};
pub use error::{Error, Result};
pub use keyword::{Sentence, TfIdfModel};
pub use refine::{RedundancyBundle, RefinementConfig};
pub use vecmath::{EmbeddingMatrix, EmbeddingVector};
