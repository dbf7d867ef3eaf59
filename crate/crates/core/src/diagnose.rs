//! Diagnostic analyses: word importance, redundancy overlap ratio, the
//! spectral sweep over the refinement weights, and the whitening baseline.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_unique, Encoder};
use crate::error::{Error, Result};
use crate::eval::{
    build_bundle, pair_predictions, score_bundle, spearman, Ablation, EvalReport,
    SimilarityDataset,
};
use crate::keyword::{select_keywords, Sentence, TfIdfModel};
use crate::refine::{masked_text, refine_with, RefinementConfig};
use crate::vecmath::{
    cosine, spectral_report, whiten, EmbeddingMatrix, EmbeddingVector, DEFAULT_WHITEN_EPS,
};

pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_SAMPLE_SEED: u64 = 42;

/// The refinement `G(x) = f(x) - lambda1 * f(x*) - lambda2 * v_hat` applied
/// inside the importance measure.
#[derive(Debug, Clone, Copy)]
pub struct Refinement<'a> {
    pub model: &'a TfIdfModel,
    pub config: &'a RefinementConfig,
    pub corpus_redundancy: &'a EmbeddingVector,
}

/// Importance `H` of every position of `first`, in order.
///
/// `H(w) = Sim(x, y) - Sim(x / w, y)` where `x / w` drops the token at that
/// position and rejoins the rest with single spaces. The base sentence is
/// encoded in the same canonical joined form so the only difference between
/// the two sides is the deleted word. With `refinement`, all embeddings pass
/// through `G` first and each deleted variant gets its own masked sentence.
pub fn importance_profile<E: Encoder + ?Sized>(
    first: &Sentence,
    second: &Sentence,
    h: &E,
    refinement: Option<&Refinement<'_>>,
) -> Result<Vec<f64>> {
    let positions: Vec<usize> = (0..first.len()).collect();
    importance_at(first, second, &positions, h, refinement)
}

fn importance_at<E: Encoder + ?Sized>(
    first: &Sentence,
    second: &Sentence,
    positions: &[usize],
    h: &E,
    refinement: Option<&Refinement<'_>>,
) -> Result<Vec<f64>> {
    if first.len() < 2 {
        return Err(Error::SentenceTooShort {
            len: first.len(),
            required: 2,
        });
    }
    let mut sentences = vec![
        Sentence::from_tokens(&first.tokens().iter().map(|t| &t.text).collect::<Vec<_>>())?,
        second.clone(),
    ];
    for &p in positions {
        sentences.push(first.without(p)?);
    }
    let mut texts: Vec<String> = sentences.iter().map(|s| s.raw().to_string()).collect();
    if let Some(r) = refinement {
        for s in &sentences {
            texts.push(masked_text(s, r.model, r.config)?);
        }
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let mut vectors = encode_unique(h, &refs)?;
    if let Some(r) = refinement {
        let stars = vectors.split_off(sentences.len());
        vectors = vectors
            .iter()
            .zip(&stars)
            .map(|(v, s)| {
                refine_with(v, s, r.corpus_redundancy, r.config.lambda1, r.config.lambda2)
            })
            .collect::<Result<_>>()?;
    }
    let base = cosine(&vectors[0], &vectors[1])?;
    vectors[2..]
        .iter()
        .map(|d| Ok(base - cosine(d, &vectors[1])?))
        .collect()
}

/// `H` for a single position of the first sentence.
pub fn word_importance<E: Encoder + ?Sized>(
    pair: (&Sentence, &Sentence),
    word_position: usize,
    h: &E,
    refinement: Option<&Refinement<'_>>,
) -> Result<f64> {
    if word_position >= pair.0.len() {
        return Err(Error::IndexOutOfRange {
            index: word_position,
            len: pair.0.len(),
        });
    }
    Ok(importance_at(pair.0, pair.1, &[word_position], h, refinement)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecord {
    pub word: String,
    pub h_raw: f64,
    pub h_refined: f64,
    pub delta: f64,
}

impl ImportanceRecord {
    pub fn new(word: impl Into<String>, h_raw: f64, h_refined: f64) -> Self {
        Self {
            word: word.into(),
            h_raw,
            h_refined,
            delta: h_refined - h_raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    /// Sorted by `delta` ascending, then by word.
    pub records: Vec<ImportanceRecord>,
    /// Pairs whose first sentence was too short to delete a word from.
    pub skipped: usize,
}

/// Mean importance of each (lowercased) word of the first sentences, with
/// and without refinement.
pub fn importance_table<E: Encoder + ?Sized>(
    pairs: &[(Sentence, Sentence)],
    h: &E,
    refinement: &Refinement<'_>,
) -> Result<ImportanceTable> {
    let mut sums: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    let mut skipped = 0;
    for (a, b) in pairs {
        if a.len() < 2 {
            skipped += 1;
            continue;
        }
        let raw = importance_profile(a, b, h, None)?;
        let refined = importance_profile(a, b, h, Some(refinement))?;
        for (t, (r, g)) in a.tokens().iter().zip(raw.iter().zip(&refined)) {
            let e = sums.entry(t.norm.clone()).or_insert((0.0, 0.0, 0));
            e.0 += r;
            e.1 += g;
            e.2 += 1;
        }
    }
    let mut records: Vec<ImportanceRecord> = sums
        .into_iter()
        .map(|(w, (r, g, n))| ImportanceRecord::new(w, r / n as f64, g / n as f64))
        .collect();
    records.sort_by(|x, y| x.delta.total_cmp(&y.delta).then_with(|| x.word.cmp(&y.word)));
    Ok(ImportanceTable { records, skipped })
}

impl ImportanceTable {
    /// TSV with header `word, h_raw, h_refined, delta`; a trailing `#` line
    /// notes skipped pairs.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\th_raw\th_refined\tdelta\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.word,
                format_sig(r.h_raw, 6),
                format_sig(r.h_refined, 6),
                format_sig(r.delta, 6)
            ));
        }
        if self.skipped > 0 {
            out.push_str(&format!(
                "# skipped {} pair(s): first sentence shorter than 2 tokens\n",
                self.skipped
            ));
        }
        out
    }
}

/// `|S ∩ T| / |T|`.
pub fn overlap_from_sets(trivial: &BTreeSet<usize>, top: &BTreeSet<usize>) -> f64 {
    if top.is_empty() {
        return 0.0;
    }
    trivial.intersection(top).count() as f64 / top.len() as f64
}

/// Redundancy overlap ratio of one pair: the share of the `top_k` most
/// important positions of the first sentence that are trivial (non-keyword)
/// positions. Ties on `H` go to the earlier position.
pub fn overlap_ratio<E: Encoder + ?Sized>(
    pair: (&Sentence, &Sentence),
    m: &TfIdfModel,
    cfg: &RefinementConfig,
    h: &E,
    top_k: usize,
    refinement: Option<&Refinement<'_>>,
) -> Result<f64> {
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be >= 1".into()));
    }
    let first = pair.0;
    if first.len() < top_k + 1 {
        return Err(Error::SentenceTooShort {
            len: first.len(),
            required: top_k + 1,
        });
    }
    let importance = importance_profile(first, pair.1, h, refinement)?;
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let top: BTreeSet<usize> = order.into_iter().take(top_k).collect();
    let keywords = select_keywords(first, m, cfg.mask_ratio)?;
    let trivial: BTreeSet<usize> = (0..first.len()).filter(|i| !keywords.contains(i)).collect();
    Ok(overlap_from_sets(&trivial, &top))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `(pair index, r)` for every eligible pair, in index order.
    pub per_pair: Vec<(usize, f64)>,
    pub r_hat: f64,
    pub skipped: usize,
}

impl OverlapReport {
    pub fn from_ratios(per_pair: Vec<(usize, f64)>, skipped: usize) -> Result<Self> {
        if per_pair.is_empty() {
            return Err(Error::NoEligiblePairs { skipped });
        }
        let r_hat = per_pair.iter().map(|(_, r)| r).sum::<f64>() / per_pair.len() as f64;
        Ok(Self {
            per_pair,
            r_hat,
            skipped,
        })
    }
}

/// Pair indices to analyse: all of them, or `n` drawn without replacement by
/// a ChaCha8 generator seeded with `seed`, returned in ascending order.
pub fn sample_indices(total: usize, sample: Option<usize>, seed: u64) -> Vec<usize> {
    match sample {
        Some(n) if n < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapSettings {
    pub top_k: usize,
    pub sample: Option<usize>,
    pub seed: u64,
}

impl Default for OverlapSettings {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            sample: None,
            seed: DEFAULT_SAMPLE_SEED,
        }
    }
}

/// Mean redundancy overlap ratio over (a sample of) pairs. Pairs whose first
/// sentence is too short are skipped and counted.
pub fn average_overlap<E: Encoder + ?Sized>(
    pairs: &[(Sentence, Sentence)],
    m: &TfIdfModel,
    cfg: &RefinementConfig,
    h: &E,
    settings: OverlapSettings,
    refinement: Option<&Refinement<'_>>,
) -> Result<OverlapReport> {
    let mut per_pair = Vec::new();
    let mut skipped = 0;
    for i in sample_indices(pairs.len(), settings.sample, settings.seed) {
        let (a, b) = &pairs[i];
        match overlap_ratio((a, b), m, cfg, h, settings.top_k, refinement) {
            Ok(r) => per_pair.push((i, r)),
            Err(Error::SentenceTooShort { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    OverlapReport::from_ratios(per_pair, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Lambda1,
    Lambda2,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda1" => Ok(SweepAxis::Lambda1),
            "lambda2" => Ok(SweepAxis::Lambda2),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    pub spearman: f64,
    pub lambda_max: f64,
    pub trace_bound: f64,
}

/// Spearman and spectrum of the refined matrix along one weight axis, the
/// other weight held at `fixed_other`. The corpus is encoded once.
pub fn lambda_sweep<E: Encoder + ?Sized>(
    ds: &SimilarityDataset,
    axis: SweepAxis,
    values: &[f64],
    fixed_other: f64,
    h: &E,
    m: &TfIdfModel,
    cfg: &RefinementConfig,
) -> Result<Vec<SweepRecord>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) || values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidConfig(
            "sweep values must be non-negative and strictly ascending".into(),
        ));
    }
    let bundle = build_bundle(ds, m, cfg, h)?;
    values
        .iter()
        .map(|&lambda| {
            let (l1, l2) = match axis {
                SweepAxis::Lambda1 => (lambda, fixed_other),
                SweepAxis::Lambda2 => (fixed_other, lambda),
            };
            let spectrum = spectral_report(&bundle.refined(l1, l2)?)?;
            Ok(SweepRecord {
                lambda,
                spearman: score_bundle(ds, &bundle, l1, l2)?,
                lambda_max: spectrum.lambda_max,
                trace_bound: spectrum.trace_bound,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "lambda,spearman,lambda_max,trace_bound";

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_sig(r.lambda, 6),
            format_sig(r.spearman, 6),
            format_sig(r.lambda_max, 6),
            format_sig(r.trace_bound, 6)
        ));
    }
    out
}

/// `printf("%.*g")`-style rendering: `digits` significant digits, trailing
/// zeros dropped, exponent form outside `1e-4 <= |x| < 10^digits`.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Whitening comparator: raw encodings are whitened and pairs scored by
/// cosine. `spearman_refined` holds the whitened score; the weight fields
/// are zero since whitening has none.
pub fn whitening_baseline<E: Encoder + ?Sized>(
    ds: &SimilarityDataset,
    h: &E,
) -> Result<EvalReport> {
    if ds.len() < 2 {
        return Err(Error::TooFewPairs(ds.len()));
    }
    let pooled = ds.pooled();
    let texts: Vec<&str> = pooled.iter().map(Sentence::raw).collect();
    let raw = EmbeddingMatrix::new(encode_unique(h, &texts)?)?;
    let gold = ds.gold();
    let spearman_raw = spearman(&pair_predictions(&raw)?, &gold)?;
    let white = whiten(&raw, DEFAULT_WHITEN_EPS)?;
    let spearman_refined = spearman(&pair_predictions(&white)?, &gold)?;
    Ok(EvalReport {
        dataset: ds.name.clone(),
        spearman_raw,
        spearman_refined,
        lambda1: 0.0,
        lambda2: 0.0,
        ablation: Ablation::None,
    })
}
