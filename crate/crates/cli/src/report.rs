use serde::{Deserialize, Serialize};

use repal_core::eval::{Ablation, EvalReport, GridCell};

/// The JSON report written by `eval`, `tune` and `diagnose whitening`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub spearman_raw: f64,
    pub spearman_refined: f64,
    pub ablation: Ablation,
    pub encoder: String,
    pub seed: u64,
}

impl RunReport {
    pub fn new(r: &EvalReport, encoder: String, seed: u64) -> Self {
        Self {
            dataset: r.dataset.clone(),
            lambda1: r.lambda1,
            lambda2: r.lambda2,
            spearman_raw: r.spearman_raw,
            spearman_refined: r.spearman_refined,
            ablation: r.ablation,
            encoder,
            seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TuneReport {
    #[serde(flatten)]
    pub report: RunReport,
    pub grid1: Vec<f64>,
    pub grid2: Vec<f64>,
    pub surface: Vec<GridCell>,
}

#[derive(Debug, Serialize)]
pub struct WhiteningReport {
    #[serde(flatten)]
    pub report: RunReport,
    pub method: &'static str,
}

/// Only the weights, so any report above can feed `--params`.
#[derive(Debug, Deserialize)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Serialize)]
pub struct OverlapPair {
    pub index: usize,
    pub raw: f64,
    pub refined: f64,
}

#[derive(Debug, Serialize)]
pub struct OverlapJson {
    pub dataset: String,
    pub encoder: String,
    pub seed: u64,
    pub top_k: usize,
    pub sample: Option<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r_hat_raw: f64,
    pub r_hat_refined: f64,
    pub skipped: usize,
    pub pairs: Vec<OverlapPair>,
}
