//! Semantic-similarity evaluation: datasets, Spearman correlation,
//! before/after scoring, ablations and the `(lambda1, lambda2)` grid search.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::keyword::{Sentence, TfIdfModel, TokenizerMode};
use crate::refine::{RedundancyBundle, RefinementConfig};
use crate::vecmath::{cosine, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub a: Sentence,
    pub b: Sentence,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub split: Split,
    pub pairs: Vec<ScoredPair>,
}

impl SimilarityDataset {
    /// Sentences of both sides interleaved: `a0, b0, a1, b1, ...`.
    pub fn pooled(&self) -> Vec<Sentence> {
        self.pairs
            .iter()
            .flat_map(|p| [p.a.clone(), p.b.clone()])
            .collect()
    }

    pub fn gold(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.gold).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// First `n` pairs and the rest, as two datasets.
    pub fn split_at(&self, n: usize, first: Split, second: Split) -> (Self, Self) {
        let n = n.min(self.pairs.len());
        let make = |pairs: &[ScoredPair], split| Self {
            name: self.name.clone(),
            split,
            pairs: pairs.to_vec(),
        };
        (make(&self.pairs[..n], first), make(&self.pairs[n..], second))
    }
}

/// Parses the three-column TSV format `sentence_a \t sentence_b \t gold`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_dataset(
    text: &str,
    name: &str,
    split: Split,
    mode: TokenizerMode,
) -> Result<SimilarityDataset> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::Parse {
            line: lineno,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let a = mode.sentence(cols[0]).map_err(|e| bad(format!("sentence_a: {e}")))?;
        let b = mode.sentence(cols[1]).map_err(|e| bad(format!("sentence_b: {e}")))?;
        let gold: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("gold score {:?} is not a number", cols[2])))?;
        if !gold.is_finite() {
            return Err(bad(format!("gold score {gold} is not finite")));
        }
        pairs.push(ScoredPair { a, b, gold });
    }
    if pairs.len() < 2 {
        return Err(Error::TooFewPairs(pairs.len()));
    }
    Ok(SimilarityDataset {
        name: name.to_string(),
        split,
        pairs,
    })
}

/// Loads a dataset file; its name is the file stem.
pub fn load_dataset(path: &Path, split: Split, mode: TokenizerMode) -> Result<SimilarityDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&text, &name, split, mode)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if x.len() < 2 || constant(x) || constant(y) {
        return Err(Error::DegenerateRanking);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("spearman inputs must be finite".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Sentence-level redundancy off (`lambda1 = 0`).
    NoSen,
    /// Corpus-level redundancy off (`lambda2 = 0`).
    NoCor,
}

impl Ablation {
    /// Effective `(lambda1, lambda2)` under this ablation.
    pub fn apply(self, lambda1: f64, lambda2: f64) -> (f64, f64) {
        match self {
            Ablation::None => (lambda1, lambda2),
            Ablation::NoSen => (0.0, lambda2),
            Ablation::NoCor => (lambda1, 0.0),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::NoSen => "no_sen",
            Ablation::NoCor => "no_cor",
        })
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "no-sen" | "no_sen" => Ok(Ablation::NoSen),
            "no-cor" | "no_cor" => Ok(Ablation::NoCor),
            other => Err(Error::InvalidConfig(format!("unknown ablation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub spearman_raw: f64,
    pub spearman_refined: f64,
    /// Effective weights, after the ablation is applied.
    pub lambda1: f64,
    pub lambda2: f64,
    pub ablation: Ablation,
}

impl EvalReport {
    /// `NAME: raw -> refined (+delta)`, Spearman scaled by 100.
    pub fn arrow_line(&self) -> String {
        let raw = self.spearman_raw * 100.0;
        let refined = self.spearman_refined * 100.0;
        format!(
            "{}: {raw:.2} -> {refined:.2} ({:+.2})",
            self.dataset,
            refined - raw
        )
    }
}

/// Cosine of rows `2i` and `2i + 1` for each pair.
pub fn pair_predictions(m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    m.rows()
        .chunks_exact(2)
        .map(|p| cosine(&p[0], &p[1]))
        .collect()
}

/// Spearman of refined-pair cosines against gold, for one weight setting.
pub fn score_bundle(
    ds: &SimilarityDataset,
    bundle: &RedundancyBundle,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let preds = pair_predictions(&bundle.refined(lambda1, lambda2)?)?;
    spearman(&preds, &ds.gold())
}

pub fn build_bundle<E: Encoder + ?Sized>(
    ds: &SimilarityDataset,
    m: &TfIdfModel,
    cfg: &RefinementConfig,
    h: &E,
) -> Result<RedundancyBundle> {
    if ds.len() < 2 {
        return Err(Error::TooFewPairs(ds.len()));
    }
    RedundancyBundle::build(&ds.pooled(), m, cfg, h)
}

pub fn score_pairs<E: Encoder + ?Sized>(
    ds: &SimilarityDataset,
    cfg: &RefinementConfig,
    h: &E,
    m: &TfIdfModel,
    ablation: Ablation,
) -> Result<EvalReport> {
    cfg.validate()?;
    let bundle = build_bundle(ds, m, cfg, h)?;
    report_from_bundle(ds, &bundle, cfg.lambda1, cfg.lambda2, ablation)
}

pub fn report_from_bundle(
    ds: &SimilarityDataset,
    bundle: &RedundancyBundle,
    lambda1: f64,
    lambda2: f64,
    ablation: Ablation,
) -> Result<EvalReport> {
    let (lambda1, lambda2) = ablation.apply(lambda1, lambda2);
    Ok(EvalReport {
        dataset: ds.name.clone(),
        spearman_raw: score_bundle(ds, bundle, 0.0, 0.0)?,
        spearman_refined: score_bundle(ds, bundle, lambda1, lambda2)?,
        lambda1,
        lambda2,
        ablation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lambda1_values: Vec<f64>,
    lambda2_values: Vec<f64>,
}

impl GridSpec {
    pub fn new(lambda1_values: Vec<f64>, lambda2_values: Vec<f64>) -> Result<Self> {
        for (name, values) in [("lambda1", &lambda1_values), ("lambda2", &lambda2_values)] {
            if values.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidConfig(format!("{name} grid values must be finite and >= 0")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!("{name} grid must be strictly ascending")));
            }
        }
        Ok(Self {
            lambda1_values,
            lambda2_values,
        })
    }

    pub fn parse(lambda1: &str, lambda2: &str) -> Result<Self> {
        Self::new(parse_grid(lambda1)?, parse_grid(lambda2)?)
    }

    pub fn lambda1_values(&self) -> &[f64] {
        &self.lambda1_values
    }

    pub fn lambda2_values(&self) -> &[f64] {
        &self.lambda2_values
    }
}

pub const DEFAULT_GRID1: &str = "0:1:0.05";
pub const DEFAULT_GRID2: &str = "0:2:0.05";

impl Default for GridSpec {
    fn default() -> Self {
        Self::parse(DEFAULT_GRID1, DEFAULT_GRID2).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub best_spearman: f64,
    pub raw_spearman: f64,
    /// Every evaluated cell, `lambda2`-major in ascending order.
    pub surface: Vec<GridCell>,
}

/// Exhaustive search for the weights maximizing Spearman on `dev`.
///
/// Ties go to the smaller `lambda2`, then the smaller `lambda1`. The mask
/// settings come from `cfg`; its weights are ignored.
pub fn grid_search<E: Encoder + ?Sized>(
    dev: &SimilarityDataset,
    grid: &GridSpec,
    h: &E,
    m: &TfIdfModel,
    cfg: &RefinementConfig,
) -> Result<GridResult> {
    cfg.with_lambdas(0.0, 0.0).validate()?;
    let bundle = build_bundle(dev, m, cfg, h)?;
    grid_search_bundle(dev, grid, &bundle)
}

pub fn grid_search_bundle(
    dev: &SimilarityDataset,
    grid: &GridSpec,
    bundle: &RedundancyBundle,
) -> Result<GridResult> {
    let mut surface = Vec::with_capacity(grid.lambda1_values.len() * grid.lambda2_values.len());
    let mut best: Option<GridCell> = None;
    for &lambda2 in &grid.lambda2_values {
        for &lambda1 in &grid.lambda1_values {
            let cell = GridCell {
                lambda1,
                lambda2,
                spearman: score_bundle(dev, bundle, lambda1, lambda2)?,
            };
            if best.map_or(true, |b| cell.spearman > b.spearman) {
                best = Some(cell);
            }
            surface.push(cell);
        }
    }
    let best = best.expect("grid is non-empty");
    Ok(GridResult {
        lambda1: best.lambda1,
        lambda2: best.lambda2,
        best_spearman: best.spearman,
        raw_spearman: score_bundle(dev, bundle, 0.0, 0.0)?,
        surface,
    })
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
///
/// Progression values are computed as `start + k·step`; `stop` is included
/// when it lies within 1e-9 of a grid point.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |reason: &str| Error::BadGridSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("{s:?} is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite"))
        }
    };
    let spec_trim = spec.trim();
    if spec_trim.is_empty() {
        return Err(bad("empty"));
    }
    if spec_trim.contains(':') {
        let parts: Vec<&str> = spec_trim.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("stop must not be below start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(bad("too many grid points"));
        }
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    } else {
        spec_trim.split(',').map(num).collect()
    }
}
