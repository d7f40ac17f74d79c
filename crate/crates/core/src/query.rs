//! Prompt-derived query direction.
//!
//! The query is a weighted sum of text-token embeddings, l2-normalized. The
//! weighting scheme decides which prompt positions dominate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, FeatureMatrix, DEFAULT_EPS};

/// Base of the exponential position weighting.
pub const DEFAULT_GAMMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Weighting {
    /// No text guidance: relevance is zero everywhere and selection is
    /// diversity-only.
    None,
    Uniform,
    /// Triangular profile peaking at the middle token.
    MiddlePeak,
    /// `gamma^(j-1)`, growing toward the end of the prompt.
    #[default]
    Exponential,
    /// Caller-supplied per-token weights, e.g. text self-attention.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    /// `J x C` text-token embeddings, one row per prompt token.
    pub embeddings: FeatureMatrix,
    pub weighting: Weighting,
    pub explicit_weights: Option<Vec<f64>>,
    pub gamma: f64,
    /// Optional `C_v x C_text` matrix mapping each embedding into the visual
    /// feature space before aggregation.
    pub projection: Option<FeatureMatrix>,
    pub eps: f64,
}

impl QuerySpec {
    pub fn new(embeddings: FeatureMatrix, weighting: Weighting) -> Self {
        Self { embeddings, weighting, explicit_weights: None, gamma: DEFAULT_GAMMA, projection: None, eps: DEFAULT_EPS }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Switches to explicit weighting with the given per-token weights.
    pub fn with_explicit_weights(mut self, weights: Vec<f64>) -> Self {
        self.weighting = Weighting::Explicit;
        self.explicit_weights = Some(weights);
        self
    }

    pub fn with_projection(mut self, projection: FeatureMatrix) -> Self {
        self.projection = Some(projection);
        self
    }
}

/// Normalized query direction `q_hat`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueryEmbedding {
    pub vector: Vec<f64>,
    pub scheme: Weighting,
    /// Set when the aggregated vector had (near) zero norm; `vector` is then
    /// all zeros.
    pub degenerate: bool,
}

impl QueryEmbedding {
    /// Query for the text-free variant: zero vector, diversity-only selection.
    pub fn no_text(dim: usize) -> Self {
        Self { vector: vec![0.0; dim], scheme: Weighting::None, degenerate: true }
    }

    /// Normalizes a precomputed query vector.
    pub fn from_direction(raw: &[f64], scheme: Weighting, eps: f64) -> Self {
        let norm = libm::sqrt(dot(raw, raw));
        if norm > eps {
            Self { vector: raw.iter().map(|v| v / norm).collect(), scheme, degenerate: false }
        } else {
            Self { vector: vec![0.0; raw.len()], scheme, degenerate: true }
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn is_no_text(&self) -> bool {
        self.scheme == Weighting::None
    }
}

/// Per-token aggregation weights, nonnegative and summing to one.
pub fn weights_for(scheme: Weighting, j: usize, gamma: f64, explicit: Option<&[f64]>) -> Result<Vec<f64>> {
    if j == 0 {
        return Err(Error::Config("query needs at least one text token"));
    }
    let raw: Vec<f64> = match scheme {
        Weighting::None => return Err(Error::Config("no weights exist for the text-free variant")),
        Weighting::Uniform => vec![1.0; j],
        Weighting::Exponential => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::Config("gamma must be positive and finite"));
            }
            // gamma^(j-1) rescaled by gamma^-(J-1) so long prompts cannot overflow
            (0..j).map(|i| libm::pow(gamma, i as f64 - (j - 1) as f64)).collect()
        }
        Weighting::MiddlePeak => {
            if j == 1 {
                vec![1.0]
            } else {
                let span = (j - 1) as f64;
                let tri: Vec<f64> = (0..j).map(|i| 1.0 - libm::fabs(2.0 * i as f64 / span - 1.0)).collect();
                // J = 2 has no interior point; the profile is flat
                if tri.iter().all(|&w| w == 0.0) {
                    vec![1.0; j]
                } else {
                    tri
                }
            }
        }
        Weighting::Explicit => {
            let w = explicit.ok_or(Error::Config("explicit weighting requires weights"))?;
            if w.len() != j {
                return Err(Error::Config("explicit weights length differs from token count"));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("explicit weights must be finite and nonnegative"));
            }
            w.to_vec()
        }
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Config("weights must have a positive finite sum"));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Aggregates the prompt tokens and normalizes the result.
///
/// `Weighting::None` yields the text-free query of the target dimension.
pub fn build_query(spec: &QuerySpec) -> Result<QueryEmbedding> {
    let e = &spec.embeddings;
    let dim = match &spec.projection {
        Some(p) => {
            if p.cols() != e.cols() {
                return Err(Error::DimensionMismatch { expected: p.cols(), found: e.cols() });
            }
            p.rows()
        }
        None => e.cols(),
    };
    if spec.weighting == Weighting::None {
        return Ok(QueryEmbedding::no_text(dim));
    }
    if !(spec.eps > 0.0 && spec.eps.is_finite()) {
        return Err(Error::Config("eps must be positive and finite"));
    }
    let weights = weights_for(spec.weighting, e.rows(), spec.gamma, spec.explicit_weights.as_deref())?;

    let mut q = vec![0.0; dim];
    let mut projected = vec![0.0; dim];
    for (row, w) in e.iter_rows().zip(&weights) {
        let token = match &spec.projection {
            Some(p) => {
                for (out, prow) in projected.iter_mut().zip(p.iter_rows()) {
                    *out = dot(prow, row);
                }
                &projected[..]
            }
            None => row,
        };
        for (acc, v) in q.iter_mut().zip(token) {
            *acc += w * v;
        }
    }
    Ok(QueryEmbedding::from_direction(&q, spec.weighting, spec.eps))
}
