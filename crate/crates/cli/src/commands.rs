use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use repal_core::diagnose::{
    average_overlap, importance_table, lambda_sweep, sweep_csv, whitening_baseline, format_sig,
    OverlapSettings, Refinement, SweepAxis,
};
use repal_core::encoder::{encode_unique, CachingEncoder, EmbeddingCache};
use repal_core::eval::{
    grid_search, load_dataset, parse_grid, score_pairs, Ablation, EvalReport, GridSpec,
    SimilarityDataset, Split,
};
use repal_core::keyword::{build_tfidf_with, Sentence, Stopwords, TfIdfModel, TokenizerMode};
use repal_core::refine::{corpus_redundancy, masked_text, RefinementConfig};
use repal_core::synthetic;
use repal_core::{EncoderHandle, Error};

use crate::report::{
    OverlapJson, OverlapPair, RunReport, TuneReport, Weights, WhiteningReport,
};
use crate::{Cli, Command, DiagnoseCommand, DiagnoseCommon, EncoderArg, MaskArgs, WeightArgs};

pub const TIMEOUT_ENV: &str = "REPAL_HTTP_TIMEOUT_MS";

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_encoder_failure() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Mask { input, tfidf_corpus, out, mask } => {
            cmd_mask(&input, tfidf_corpus.as_deref(), out.as_deref(), &mask)
        }
        Command::EncodeCache { encoder, input, dataset, deletions, out, mask } => {
            cmd_encode_cache(&encoder, &input, &dataset, deletions, &out, &mask)
        }
        Command::Tune { dev, test, tune_on_test, grid1, grid2, encoder, out, mask } => {
            let (path, split) = match (dev, test, tune_on_test) {
                (Some(d), _, false) => (d, Split::Dev),
                (None, Some(t), true) => {
                    eprintln!("warning: tuning on the test split; scores are not held out");
                    (t, Split::Test)
                }
                (Some(_), _, true) => {
                    return Err(CliError::Usage("--tune-on-test conflicts with --dev".into()))
                }
                (None, None, true) => {
                    return Err(CliError::Usage("--tune-on-test needs --test".into()))
                }
                (None, _, false) => return Err(CliError::Usage("--dev is required".into())),
            };
            cmd_tune(&path, split, &grid1, &grid2, &encoder, out.as_deref(), &mask, seed)
        }
        Command::Eval { test, weights, ablation, encoder, out, mask } => {
            let ablation = Ablation::from_str(&ablation)?;
            cmd_eval(&test, &weights, ablation, &encoder, out.as_deref(), &mask, seed)
        }
        Command::Diagnose { command } => match command {
            DiagnoseCommand::Importance { common, weights } => cmd_importance(&common, &weights),
            DiagnoseCommand::Overlap { common, weights, top_k, sample } => {
                cmd_overlap(&common, &weights, top_k, sample, seed)
            }
            DiagnoseCommand::Sweep { common, axis, values, fixed } => {
                cmd_sweep(&common, &axis, &values, fixed)
            }
            DiagnoseCommand::Whitening { common } => cmd_whitening(&common, seed),
        },
        Command::GenSynthetic { n_pairs, out, dev_out, dev_pairs } => {
            cmd_gen_synthetic(n_pairs, seed, out.as_deref(), dev_out.as_deref(), dev_pairs)
        }
    }
}

fn encoder(arg: &EncoderArg) -> Result<EncoderHandle> {
    let timeout = match std::env::var(TIMEOUT_ENV) {
        Ok(v) => {
            let ms: u64 = v.trim().parse().map_err(|_| {
                CliError::Usage(format!("{TIMEOUT_ENV} must be a whole number of milliseconds, got {v:?}"))
            })?;
            Some(Duration::from_millis(ms))
        }
        Err(_) => None,
    };
    Ok(EncoderHandle::from_spec(&arg.encoder, timeout)?)
}

fn stopwords(mask: &MaskArgs) -> Result<Stopwords> {
    Ok(match &mask.stopwords {
        Some(p) => Stopwords::load(p)?,
        None => Stopwords::default(),
    })
}

fn mode(mask: &MaskArgs) -> TokenizerMode {
    if mask.pretokenized {
        TokenizerMode::Pretokenized
    } else {
        TokenizerMode::Unicode
    }
}

fn config(mask: &MaskArgs, lambda1: f64, lambda2: f64) -> Result<RefinementConfig> {
    let cfg = RefinementConfig {
        lambda1,
        lambda2,
        mask_ratio: mask.mask_ratio,
        mask_token: mask.mask_token.clone(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn dataset(path: &Path, split: Split, mask: &MaskArgs) -> Result<(SimilarityDataset, TfIdfModel)> {
    let ds = load_dataset(path, split, mode(mask))?;
    let model = build_tfidf_with(&ds.pooled(), stopwords(mask)?)?;
    Ok((ds, model))
}

fn weights(w: &WeightArgs) -> Result<(f64, f64)> {
    let base = match &w.params {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io(p, e))?;
            let parsed: Weights = serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("{}: not a report with lambda1/lambda2: {e}", p.display()))
            })?;
            (parsed.lambda1, parsed.lambda2)
        }
        None => (0.0, 0.0),
    };
    Ok((w.lambda1.unwrap_or(base.0), w.lambda2.unwrap_or(base.1)))
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io { path: path.to_path_buf(), source })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

/// Writes `content` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, content).map_err(|e| io(p, e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    if let Some(p) = out {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        fs::write(p, text).map_err(|e| io(p, e))?;
    }
    Ok(())
}

/// One sentence per line; blank lines are errors so line
/// numbers stay meaningful.
fn sentences(path: &Path, mode: TokenizerMode) -> Result<Vec<Sentence>> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput.into());
    }
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            mode.sentence(line)
                .map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() }.into())
        })
        .collect()
}

fn cmd_mask(
    input: &Path,
    tfidf_corpus: Option<&Path>,
    out: Option<&Path>,
    mask: &MaskArgs,
) -> Result<()> {
    let lines = sentences(input, mode(mask))?;
    let corpus = match tfidf_corpus {
        Some(p) => sentences(p, mode(mask))?,
        None => lines.clone(),
    };
    let model = build_tfidf_with(&corpus, stopwords(mask)?)?;
    let cfg = config(mask, 0.0, 0.0)?;
    let mut text = String::new();
    for s in &lines {
        text.push_str(&masked_text(s, &model, &cfg)?);
        text.push('\n');
    }
    emit(out, &text)
}

/// Texts the refinement (and optionally the importance diagnostics) will ask
/// the encoder for, given a corpus and its keyword model.
fn refinement_texts(
    corpus: &[Sentence],
    model: &TfIdfModel,
    cfg: &RefinementConfig,
    texts: &mut BTreeSet<String>,
) -> Result<()> {
    for s in corpus {
        texts.insert(s.raw().to_string());
        texts.insert(masked_text(s, model, cfg)?);
    }
    Ok(())
}

fn cmd_encode_cache(
    enc_arg: &EncoderArg,
    inputs: &[PathBuf],
    datasets: &[PathBuf],
    deletions: bool,
    out: &Path,
    mask: &MaskArgs,
) -> Result<()> {
    if inputs.is_empty() && datasets.is_empty() {
        return Err(CliError::Usage("nothing to encode: pass --input or --dataset".into()));
    }
    let cfg = config(mask, 0.0, 0.0)?;
    let mut texts = BTreeSet::new();
    for p in inputs {
        let corpus = sentences(p, mode(mask))?;
        let model = build_tfidf_with(&corpus, stopwords(mask)?)?;
        refinement_texts(&corpus, &model, &cfg, &mut texts)?;
    }
    for p in datasets {
        let (ds, model) = dataset(p, Split::Test, mask)?;
        refinement_texts(&ds.pooled(), &model, &cfg, &mut texts)?;
        if deletions {
            let mut variants = Vec::new();
            for pair in ds.pairs.iter().filter(|pair| pair.a.len() >= 2) {
                let words: Vec<&str> = pair.a.tokens().iter().map(|t| t.text.as_str()).collect();
                variants.push(Sentence::from_tokens(&words)?);
                for i in 0..pair.a.len() {
                    variants.push(pair.a.without(i)?);
                }
            }
            refinement_texts(&variants, &model, &cfg, &mut texts)?;
        }
    }

    let enc = encoder(enc_arg)?;
    let caching = if out.exists() {
        CachingEncoder::with_cache(&enc, EmbeddingCache::load(out)?)
    } else {
        CachingEncoder::new(&enc)
    };
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    encode_unique(&caching, &refs)?;
    let store = caching.into_cache().expect("populated by encode");
    store.save(out)?;
    println!(
        "{} embeddings (dim {}) in {}",
        store.len(),
        store.dim(),
        out.display()
    );
    Ok(())
}

fn weight(x: f64) -> String {
    format_sig(x, 6)
}

#[allow(clippy::too_many_arguments)]
fn cmd_tune(
    path: &Path,
    split: Split,
    grid1: &str,
    grid2: &str,
    enc_arg: &EncoderArg,
    out: Option<&Path>,
    mask: &MaskArgs,
    seed: u64,
) -> Result<()> {
    let grid = GridSpec::parse(grid1, grid2)?;
    let (ds, model) = dataset(path, split, mask)?;
    let enc = encoder(enc_arg)?;
    let cfg = config(mask, 0.0, 0.0)?;
    let result = grid_search(&ds, &grid, &enc, &model, &cfg)?;
    let report = EvalReport {
        dataset: ds.name.clone(),
        spearman_raw: result.raw_spearman,
        spearman_refined: result.best_spearman,
        lambda1: result.lambda1,
        lambda2: result.lambda2,
        ablation: Ablation::None,
    };
    println!(
        "best lambda1={} lambda2={}  {}",
        weight(result.lambda1),
        weight(result.lambda2),
        report.arrow_line()
    );
    write_json(
        out,
        &TuneReport {
            report: RunReport::new(&report, enc.to_string(), seed),
            grid1: grid.lambda1_values().to_vec(),
            grid2: grid.lambda2_values().to_vec(),
            surface: result.surface,
        },
    )
}

fn cmd_eval(
    path: &Path,
    w: &WeightArgs,
    ablation: Ablation,
    enc_arg: &EncoderArg,
    out: Option<&Path>,
    mask: &MaskArgs,
    seed: u64,
) -> Result<()> {
    let (lambda1, lambda2) = weights(w)?;
    let cfg = config(mask, lambda1, lambda2)?;
    let (ds, model) = dataset(path, Split::Test, mask)?;
    let enc = encoder(enc_arg)?;
    let report = score_pairs(&ds, &cfg, &enc, &model, ablation)?;
    println!("{}", report.arrow_line());
    write_json(out, &RunReport::new(&report, enc.to_string(), seed))
}

struct Prepared {
    ds: SimilarityDataset,
    model: TfIdfModel,
    enc: EncoderHandle,
}

fn prepare(common: &DiagnoseCommon) -> Result<Prepared> {
    let (ds, model) = dataset(&common.dataset, Split::Test, &common.mask)?;
    let enc = encoder(&common.encoder)?;
    Ok(Prepared { ds, model, enc })
}

fn pairs(ds: &SimilarityDataset) -> Vec<(Sentence, Sentence)> {
    ds.pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect()
}

fn cmd_importance(common: &DiagnoseCommon, w: &WeightArgs) -> Result<()> {
    let (lambda1, lambda2) = weights(w)?;
    let cfg = config(&common.mask, lambda1, lambda2)?;
    let p = prepare(common)?;
    let v_hat = corpus_redundancy(&p.ds.pooled(), &p.enc)?;
    let refinement = Refinement {
        model: &p.model,
        config: &cfg,
        corpus_redundancy: &v_hat,
    };
    let table = importance_table(&pairs(&p.ds), &p.enc, &refinement)?;
    if table.skipped > 0 {
        eprintln!(
            "warning: skipped {} pair(s) whose first sentence has fewer than 2 tokens",
            table.skipped
        );
    }
    emit(common.out.as_deref(), &table.to_tsv())
}

fn cmd_overlap(
    common: &DiagnoseCommon,
    w: &WeightArgs,
    top_k: usize,
    sample: Option<usize>,
    seed: u64,
) -> Result<()> {
    let (lambda1, lambda2) = weights(w)?;
    let cfg = config(&common.mask, lambda1, lambda2)?;
    let p = prepare(common)?;
    let v_hat = corpus_redundancy(&p.ds.pooled(), &p.enc)?;
    let refinement = Refinement {
        model: &p.model,
        config: &cfg,
        corpus_redundancy: &v_hat,
    };
    let settings = OverlapSettings { top_k, sample, seed };
    let pairs = pairs(&p.ds);
    let raw = average_overlap(&pairs, &p.model, &cfg, &p.enc, settings, None)?;
    let refined = average_overlap(&pairs, &p.model, &cfg, &p.enc, settings, Some(&refinement))?;
    if raw.skipped > 0 {
        eprintln!(
            "warning: skipped {} pair(s) whose first sentence has at most {top_k} tokens",
            raw.skipped
        );
    }
    println!(
        "{}: r_hat {:.4} -> {:.4} ({} pairs, {} skipped)",
        p.ds.name,
        raw.r_hat,
        refined.r_hat,
        raw.per_pair.len(),
        raw.skipped
    );
    write_json(
        common.out.as_deref(),
        &OverlapJson {
            dataset: p.ds.name.clone(),
            encoder: p.enc.to_string(),
            seed,
            top_k,
            sample,
            lambda1,
            lambda2,
            r_hat_raw: raw.r_hat,
            r_hat_refined: refined.r_hat,
            skipped: raw.skipped,
            pairs: raw
                .per_pair
                .iter()
                .zip(&refined.per_pair)
                .map(|(&(index, raw), &(_, refined))| OverlapPair { index, raw, refined })
                .collect(),
        },
    )
}

fn cmd_sweep(common: &DiagnoseCommon, axis: &str, values: &str, fixed: f64) -> Result<()> {
    let axis = SweepAxis::from_str(axis)?;
    let values = parse_grid(values)?;
    let cfg = config(&common.mask, 0.0, 0.0)?;
    let p = prepare(common)?;
    let records = lambda_sweep(&p.ds, axis, &values, fixed, &p.enc, &p.model, &cfg)?;
    emit(common.out.as_deref(), &sweep_csv(&records))
}

fn cmd_whitening(common: &DiagnoseCommon, seed: u64) -> Result<()> {
    let p = prepare(common)?;
    let report = whitening_baseline(&p.ds, &p.enc)?;
    println!("whitening {}", report.arrow_line());
    write_json(
        common.out.as_deref(),
        &WhiteningReport {
            report: RunReport::new(&report, p.enc.to_string(), seed),
            method: "whitening",
        },
    )
}

fn cmd_gen_synthetic(
    n_pairs: usize,
    seed: u64,
    out: Option<&Path>,
    dev_out: Option<&Path>,
    dev_pairs: Option<usize>,
) -> Result<()> {
    let pairs = synthetic::generate(n_pairs, seed)?;
    let rest = match (dev_out, dev_pairs) {
        (Some(path), Some(n)) => {
            if n < 2 || n + 2 > n_pairs {
                return Err(CliError::Usage(format!(
                    "--dev-pairs must leave at least 2 pairs on each side of {n_pairs}"
                )));
            }
            emit(Some(path), &synthetic::to_tsv(&pairs[..n]))?;
            &pairs[n..]
        }
        _ => &pairs[..],
    };
    emit(out, &synthetic::to_tsv(rest))
}
