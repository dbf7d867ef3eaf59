//! Dense vector and matrix primitives.
//!
//! Everything accumulates in `f64`. The spectral routines work on the
//! `dim x dim` Gram/scatter matrix rather than the `n x n` one, since the
//! embedding dimension is small and fixed while corpora can be large.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::encoder::{unit_interval, SplitMix64};
use crate::error::{Error, Result};

/// Euclidean norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 10_000;
pub const DEFAULT_WHITEN_EPS: f64 = 1e-8;

/// A dense, finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Row-stacked embeddings, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: Vec<EmbeddingVector>,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<EmbeddingVector>) -> Result<Self> {
        let dim = rows
            .first()
            .ok_or(Error::EmptyMatrix("matrix needs at least one row"))?
            .dim();
        for row in &rows {
            check_dim(dim, row.dim())?;
        }
        Ok(Self { rows, dim })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(EmbeddingVector::new).collect::<Result<_>>()?)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[EmbeddingVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &EmbeddingVector {
        &self.rows[i]
    }

    pub fn into_rows(self) -> Vec<EmbeddingVector> {
        self.rows
    }

    /// The `dim x dim` Gram matrix `EᵀE`, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for row in &self.rows {
            let r = row.as_slice();
            for i in 0..d {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..d {
                    g[i * d + j] += ri * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g[i * d + j] = g[j * d + i];
            }
        }
        g
    }

    /// Subtracts the row mean from every row.
    pub fn centered(&self) -> Self {
        let mean = mean_vector(self).expect("matrix is non-empty");
        let rows = self
            .rows
            .iter()
            .map(|r| EmbeddingVector(r.0.iter().zip(&mean.0).map(|(a, m)| a - m).collect()))
            .collect();
        Self { rows, dim: self.dim }
    }
}

/// Largest eigenvalue of the Gram matrix together with cheap companions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Largest eigenvalue of `EᵀE` (the squared top singular value of `E`).
    pub lambda_max: f64,
    /// `Σᵢ‖vᵢ‖²`, the trace of `EᵀE`; an upper bound on `lambda_max`.
    pub trace_bound: f64,
    /// Norm of the row mean.
    pub mean_norm: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let na = a.norm();
    let nb = b.norm();
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a.as_slice(), b.as_slice()) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn mean_vector(m: &EmbeddingMatrix) -> Result<EmbeddingVector> {
    mean_of(m.rows())
}

/// Component-wise mean of a non-empty slice of equal-dimension vectors.
pub fn mean_of(rows: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = rows
        .first()
        .ok_or(Error::EmptyMatrix("mean of zero rows"))?;
    let mut acc = vec![0.0; first.dim()];
    for row in rows {
        check_dim(acc.len(), row.dim())?;
        for (a, v) in acc.iter_mut().zip(row.as_slice()) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(EmbeddingVector(acc))
}

/// Largest eigenvalue of `EᵀE` by power iteration on the Gram matrix.
///
/// Starts from the normalized all-ones vector and, separately, from a fixed
/// pseudo-random vector; the larger Rayleigh quotient wins. Both starts are
/// deterministic. The second one covers Gram matrices whose top eigenvector is
/// exactly orthogonal to the all-ones direction.
pub fn largest_eigenvalue(m: &EmbeddingMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidConfig(format!(
            "power iteration needs tol > 0 and max_iter >= 1 (got {tol}, {max_iter})"
        )));
    }
    let d = m.dim();
    let gram = m.gram();
    let ones = vec![1.0; d];
    let mut rng = SplitMix64::new(0x5EED);
    let scrambled: Vec<f64> = (0..d).map(|_| unit_interval(rng.next_u64())).collect();
    let a = power_iterate(&gram, d, ones, tol, max_iter)?;
    let b = power_iterate(&gram, d, scrambled, tol, max_iter)?;
    Ok(a.max(b))
}

fn power_iterate(
    gram: &[f64],
    d: usize,
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let scale = (0..d).map(|i| gram[i * d + i]).sum::<f64>();
    if scale <= 0.0 {
        return Ok(0.0);
    }
    if !normalize(&mut x) {
        return Ok(0.0);
    }
    let mut y = vec![0.0; d];
    let mut rho = f64::NAN;
    for _ in 0..max_iter {
        mat_vec(gram, d, &x, &mut y);
        let next = dot(&x, &y);
        let norm = dot(&y, &y).sqrt();
        // Start vector lies in the null space.
        if norm <= 1e-300 || norm < 1e-14 * scale {
            return Ok(next.max(0.0));
        }
        if rho.is_finite() && (next - rho).abs() <= tol * next.abs() {
            return Ok(next);
        }
        rho = next;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_estimate: rho,
    })
}

fn normalize(x: &mut [f64]) -> bool {
    let n = dot(x, x).sqrt();
    if n < ZERO_NORM {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

fn mat_vec(a: &[f64], d: usize, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = dot(&a[i * d..(i + 1) * d], x);
    }
}

pub fn spectral_report(m: &EmbeddingMatrix) -> Result<SpectralReport> {
    let lambda_max = largest_eigenvalue(m, DEFAULT_EIGEN_TOL, DEFAULT_EIGEN_MAX_ITER)?;
    let trace_bound = m.rows().iter().map(|r| dot(r.as_slice(), r.as_slice())).sum();
    let mean_norm = mean_vector(m)?.norm();
    Ok(SpectralReport {
        lambda_max,
        trace_bound,
        mean_norm,
    })
}

/// Whitening transform: center, then rotate onto the eigenbasis of the
/// scatter matrix `C = (1/n)·Σ vᵢvᵢᵀ` and rescale each axis by
/// `(λ + eps)^(-1/2)`. Rows come back as `(vᵢ − μ)ᵀ·U·(Λ + eps·I)^(-1/2)`.
pub fn whiten(m: &EmbeddingMatrix, eps: f64) -> Result<EmbeddingMatrix> {
    if m.n() < 2 {
        return Err(Error::EmptyMatrix("whitening needs at least two rows"));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig(format!("whitening eps must be >= 0, got {eps}")));
    }
    let centered = m.centered();
    let d = m.dim();
    let n = m.n() as f64;
    let scatter = DMatrix::from_row_slice(d, d, &centered.gram()) / n;
    let eig = SymmetricEigen::new(scatter);
    let mut w = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        // Tiny negative eigenvalues are rounding noise.
        let s = 1.0 / (lambda.max(0.0) + eps).sqrt();
        if !s.is_finite() {
            return Err(Error::InvalidConfig(
                "whitening eps must be positive when the scatter matrix is singular".into(),
            ));
        }
        w.column_mut(j).scale_mut(s);
    }
    let rows = centered
        .rows()
        .iter()
        .map(|r| {
            let out: Vec<f64> = (0..d)
                .map(|j| dot(r.as_slice(), w.column(j).as_slice()))
                .collect();
            EmbeddingVector::new(out)
        })
        .collect::<Result<_>>()?;
    EmbeddingMatrix::new(rows)
}

/// Sample covariance `(1/n)·Σ (vᵢ − μ)(vᵢ − μ)ᵀ`, row-major.
pub fn covariance(m: &EmbeddingMatrix) -> Vec<f64> {
    let n = m.n() as f64;
    m.centered().gram().into_iter().map(|v| v / n).collect()
}
