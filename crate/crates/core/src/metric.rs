//! Finite metric spaces.
//!
//! A [`FiniteMetricSpace`] is a labeled point set carrying a full, dense,
//! symmetric distance matrix. Every constructor validates the metric axioms,
//! so any value of this type is a genuine (strict) metric space up to the
//! [`Tolerance`] it was validated with.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axiom violations and argument errors for finite metric spaces.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("distance matrix is empty")]
    Empty,
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("distance ({i}, {j}) is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("nonzero diagonal entry at ({0}, {0})")]
    NonzeroDiagonal(usize),
    #[error("asymmetric distances: d({i}, {j}) != d({j}, {i})")]
    Asymmetric { i: usize, j: usize },
    #[error("distance between distinct points {i} and {j} is not positive")]
    NonpositiveOffDiagonal { i: usize, j: usize },
    #[error("triangle inequality violated: d({i}, {j}) > d({i}, {via}) + d({via}, {j})")]
    TriangleViolation { i: usize, j: usize, via: usize },
    #[error("{labels} labels given for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error("scale factor must be positive and finite, got {0}")]
    NonpositiveScale(f64),
    #[error("index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {0} selected more than once")]
    DuplicateIndex(usize),
    #[error("empty index selection")]
    EmptySelection,
    #[error(
        "tolerance components must be finite, nonnegative and not both zero (abs={abs}, rel={rel})"
    )]
    InvalidTolerance { abs: f64, rel: f64 },
}

/// Absolute plus relative slack used when comparing floating point quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self, MetricError> {
        let ok = abs.is_finite() && rel.is_finite() && abs >= 0.0 && rel >= 0.0;
        if !ok || (abs == 0.0 && rel == 0.0) {
            return Err(MetricError::InvalidTolerance { abs, rel });
        }
        Ok(Self { abs, rel })
    }

    /// Slack allowed for a comparison whose operands have magnitude `scale`.
    #[inline]
    pub fn slack(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale.abs()
    }

    /// Whether `lhs <= rhs` holds within this tolerance.
    #[inline]
    pub fn le(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs + self.slack(lhs.abs().max(rhs.abs()))
    }
}

impl Default for Tolerance {
    /// Relative `1e-9`, enough to absorb rounding in shortest-path sums.
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-9,
        }
    }
}

/// A finite metric space with a dense distance matrix.
///
/// Distances are stored as a row-major matrix times a scalar `scale`, so that
/// rescaling composes exactly: `rescale(rescale(X, a), b)` and
/// `rescale(X, a * b)` produce bit-identical distances.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    name: String,
    labels: Vec<String>,
    n: usize,
    raw: Vec<f64>,
    scale: f64,
}

impl FiniteMetricSpace {
    /// Validates a square matrix with the default tolerance and index labels.
    pub fn validate(rows: &[Vec<f64>]) -> Result<Self, MetricError> {
        Self::validate_with(rows, Tolerance::default())
    }

    pub fn validate_with(rows: &[Vec<f64>], tol: Tolerance) -> Result<Self, MetricError> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        let mut flat = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare {
                    row,
                    len: r.len(),
                    expected: n,
                });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(n, flat, tol)
    }

    /// Validates a row-major `n * n` matrix.
    pub fn from_flat(n: usize, flat: Vec<f64>, tol: Tolerance) -> Result<Self, MetricError> {
        if n == 0 {
            return Err(MetricError::Empty);
        }
        if flat.len() != n * n {
            return Err(MetricError::NotSquare {
                row: flat.len() / n,
                len: flat.len() % n,
                expected: n,
            });
        }
        check_axioms(n, &flat, tol)?;
        Ok(Self {
            name: String::new(),
            labels: (0..n).map(|i| i.to_string()).collect(),
            n,
            raw: flat,
            scale: 1.0,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MetricError> {
        if labels.len() != self.n {
            return Err(MetricError::LabelCount {
                labels: labels.len(),
                points: self.n,
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of points.
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false: validation rejects empty matrices.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.raw[i * self.n + j] * self.scale
    }

    /// Materialized row-major distance matrix.
    pub fn matrix(&self) -> Vec<f64> {
        self.raw.iter().map(|d| d * self.scale).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.dist(i, j)).collect())
            .collect()
    }

    /// Largest pairwise distance; zero for a single point.
    pub fn diameter(&self) -> f64 {
        self.raw.iter().fold(0.0_f64, |m, &d| m.max(d)) * self.scale
    }

    /// Largest distance from each point.
    pub fn eccentricities(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.raw[i * self.n..(i + 1) * self.n]
                    .iter()
                    .fold(0.0_f64, |m, &d| m.max(d))
                    * self.scale
            })
            .collect()
    }

    /// Multiplies every distance by `c > 0`.
    pub fn rescale(&self, c: f64) -> Result<Self, MetricError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(MetricError::NonpositiveScale(c));
        }
        let mut out = self.clone();
        out.scale = self.scale * c;
        Ok(out)
    }

    /// Restriction to the points at `indices`, in the given order.
    pub fn subsample(&self, indices: &[usize]) -> Result<Self, MetricError> {
        if indices.is_empty() {
            return Err(MetricError::EmptySelection);
        }
        let mut seen = vec![false; self.n];
        for &i in indices {
            if i >= self.n {
                return Err(MetricError::IndexOutOfRange {
                    index: i,
                    len: self.n,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(MetricError::DuplicateIndex(i));
            }
        }
        let m = indices.len();
        let mut raw = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                raw.push(self.raw[i * self.n + j]);
            }
        }
        Ok(Self {
            name: self.name.clone(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            n: m,
            raw,
            scale: self.scale,
        })
    }

    /// Relabeled copy: point `k` of the result is point `perm[k]` of `self`.
    ///
    /// The result is isometric to `self` via `k -> perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MetricError> {
        if perm.len() != self.n {
            return Err(MetricError::LabelCount {
                labels: perm.len(),
                points: self.n,
            });
        }
        self.subsample(perm)
    }
}

impl PartialEq for FiniteMetricSpace {
    /// Two spaces are equal when their labels and materialized distances agree.
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.labels == other.labels
            && (0..self.n * self.n).all(|k| self.raw[k] * self.scale == other.raw[k] * other.scale)
    }
}

fn check_axioms(n: usize, d: &[f64], tol: Tolerance) -> Result<(), MetricError> {
    for i in 0..n {
        for j in 0..n {
            if !d[i * n + j].is_finite() {
                return Err(MetricError::NonFinite { i, j });
            }
        }
    }
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(MetricError::NonzeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (d[i * n + j], d[j * n + i]);
            if (a - b).abs() > tol.slack(a.abs().max(b.abs())) {
                return Err(MetricError::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i * n + j] <= 0.0 {
                return Err(MetricError::NonpositiveOffDiagonal { i, j });
            }
        }
    }
    // First violation in (i, j, via) lexicographic order, independent of
    // how rayon splits the rows.
    let first = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let row = &d[i * n..(i + 1) * n];
            // Row-major sweep over `via` for cache locality.
            let mut worst: Option<(usize, usize)> = None;
            for (k, &ik) in row.iter().enumerate() {
                let from_k = &d[k * n..(k + 1) * n];
                for (j, (&ij, &kj)) in row.iter().zip(from_k).enumerate() {
                    let detour = ik + kj;
                    if ij > detour + tol.slack(detour) && worst.map_or(true, |w| (j, k) < w) {
                        worst = Some((j, k));
                    }
                }
            }
            worst.map(|(j, k)| (i, j, k))
        })
        .min();
    match first {
        Some((i, j, via)) => Err(MetricError::TriangleViolation { i, j, via }),
        None => Ok(()),
    }
}
