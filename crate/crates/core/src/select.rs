//! Per-frame budgeted greedy selection.
//!
//! Starting from the most relevant candidate, each step adds the remaining
//! candidate maximizing `min_{u in S} D[u, i] + alpha * s_i`. The candidate
//! pool is re-filtered every step against the picks still owed. Kept indices
//! are reported in original patch order.

use alloc::vec::Vec;

use crate::config::PruneConfig;
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, VideoFeatures};
use crate::query::QueryEmbedding;
use crate::score::{candidate_set, top_k, ScoreState};

/// Result of pruning one frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    /// Kept token indices, strictly increasing.
    pub kept: Vec<usize>,
    /// `s_i` for every token of the frame.
    pub relevance: Vec<f64>,
    /// Indices in the order the solver picked them.
    pub selection_order: Vec<usize>,
    pub budget: usize,
}

impl Selection {
    fn from_order(selection_order: Vec<usize>, relevance: Vec<f64>) -> Self {
        let mut kept = selection_order.clone();
        kept.sort_unstable();
        Self { budget: kept.len(), kept, relevance, selection_order }
    }
}

/// `max(1, round(r * len))` with half-away-from-zero rounding, clamped to
/// `len`.
pub fn compute_budget(r: f64, len: usize) -> usize {
    let k = libm::round(r * len as f64);
    let k = if k.is_finite() && k > 0.0 { k as usize } else { 0 };
    k.max(1).min(len)
}

fn prepare(frame: &FeatureMatrix, query: &QueryEmbedding, cfg: &PruneConfig) -> Result<ScoreState> {
    cfg.validate()?;
    if query.dim() != frame.cols() {
        return Err(Error::DimensionMismatch { expected: frame.cols(), found: query.dim() });
    }
    if query.degenerate && !query.is_no_text() {
        return Err(Error::DegenerateQuery);
    }
    ScoreState::compute(frame, query, cfg.eps)
}

/// Greedy relevance/diversity selection on one frame.
///
/// A text-free query (`Weighting::None`) forces `alpha = 0`; relevance is then
/// zero everywhere, so the walk starts at token 0.
pub fn greedy_select(frame: &FeatureMatrix, query: &QueryEmbedding, cfg: &PruneConfig) -> Result<Selection> {
    let state = prepare(frame, query, cfg)?;
    let alpha = if query.is_no_text() { 0.0 } else { cfg.alpha };
    let order = greedy_order(&state, alpha, cfg);
    Ok(Selection::from_order(order, state.relevance))
}

pub(crate) fn greedy_order(state: &ScoreState, alpha: f64, cfg: &PruneConfig) -> Vec<usize> {
    let s = &state.relevance;
    let n = state.len();
    let budget = compute_budget(cfg.r, n);

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(budget);
    let mut min_dist = alloc::vec![f64::INFINITY; n];

    let initial = candidate_set(s, &remaining, cfg.tau, budget, cfg.cap_m, cfg.beta);
    // pools come back best-first with low-index tie-break
    let first = initial.first().copied().unwrap_or(0);
    take(&mut remaining, first);
    order.push(first);
    state.relax(first, &remaining, &mut min_dist);

    while order.len() < budget {
        let need = budget - order.len();
        let mut pool = candidate_set(s, &remaining, cfg.tau, need, cfg.cap_m, cfg.beta);
        if pool.is_empty() {
            pool = remaining.clone();
        }
        let mut best = pool[0];
        let mut best_score = min_dist[best] + alpha * s[best];
        for &i in &pool[1..] {
            let score = min_dist[i] + alpha * s[i];
            if score > best_score || (score == best_score && i < best) {
                best = i;
                best_score = score;
            }
        }
        take(&mut remaining, best);
        order.push(best);
        state.relax(best, &remaining, &mut min_dist);
    }
    order
}

fn take(remaining: &mut Vec<usize>, index: usize) {
    if let Ok(pos) = remaining.binary_search(&index) {
        remaining.remove(pos);
    }
}

/// Keeps the `budget` most relevant tokens, ignoring diversity.
pub fn relevance_only(frame: &FeatureMatrix, query: &QueryEmbedding, cfg: &PruneConfig) -> Result<Selection> {
    let state = prepare(frame, query, cfg)?;
    let budget = compute_budget(cfg.r, state.len());
    let order = top_k((0..state.len()).collect(), &state.relevance, budget);
    Ok(Selection::from_order(order, state.relevance))
}

/// Runs [`greedy_select`] on every frame, in frame order.
pub fn prune_video(video: &VideoFeatures, query: &QueryEmbedding, cfg: &PruneConfig) -> Result<Vec<Selection>> {
    if video.cols() != query.dim() {
        return Err(Error::DimensionMismatch { expected: video.cols(), found: query.dim() });
    }
    video.frames().iter().map(|f| greedy_select(f, query, cfg)).collect()
}

/// Rows of `frame` at the kept indices, in ascending index order.
pub fn gather_kept(frame: &FeatureMatrix, sel: &Selection) -> Result<FeatureMatrix> {
    let mut data = Vec::with_capacity(sel.kept.len() * frame.cols());
    for &i in &sel.kept {
        if i >= frame.rows() {
            return Err(Error::IndexOutOfRange { index: i, len: frame.rows() });
        }
        data.extend_from_slice(frame.row(i));
    }
    FeatureMatrix::new(sel.kept.len(), frame.cols(), data)
}

/// `min_{i != j in S} D_ij + alpha * sum_{i in S} s_i`. The min term is zero
/// for subsets smaller than two.
pub fn subset_objective(state: &ScoreState, alpha: f64, subset: &[usize]) -> f64 {
    let mut min_d = f64::INFINITY;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            min_d = min_d.min(state.get(i, j));
        }
    }
    if !min_d.is_finite() {
        min_d = 0.0;
    }
    min_d + alpha * subset.iter().map(|&i| state.relevance[i]).sum::<f64>()
}
