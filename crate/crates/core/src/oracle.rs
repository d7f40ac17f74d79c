//! Naive reference implementation of the selection pipeline.
//!
//! Written directly from the algorithm with scalar loops and explicit
//! tie-break scans. It shares only the data types with the main path: no
//! normalization, scoring, candidate or greedy code is reused, so equality
//! tests between the two catch bugs in either. Orders of magnitude slower
//! than [`crate::greedy_select`].

use alloc::vec;
use alloc::vec::Vec;

use crate::config::PruneConfig;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::query::QueryEmbedding;
use crate::select::Selection;

/// Largest frame [`oracle_exhaustive_objective`] will enumerate.
pub const MAX_EXHAUSTIVE: usize = 16;

fn normalized_tokens(frame: &FeatureMatrix, eps: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..frame.rows() {
        let row = frame.row(i);
        let mut sq = 0.0;
        for c in 0..row.len() {
            sq += row[c] * row[c];
        }
        let mut norm = libm::sqrt(sq);
        if norm <= eps {
            norm = eps;
        }
        let mut unit = vec![0.0; row.len()];
        for c in 0..row.len() {
            unit[c] = row[c] / norm;
        }
        out.push(unit);
    }
    out
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..a.len() {
        acc += a[c] * b[c];
    }
    acc
}

#[allow(clippy::manual_clamp)]
fn cosine_dissimilarity(a: &[f64], b: &[f64]) -> f64 {
    let v = 1.0 - inner(a, b);
    if v < 0.0 {
        0.0
    } else if v > 2.0 {
        2.0
    } else {
        v
    }
}

fn budget(r: f64, len: usize) -> usize {
    let raw = r * len as f64;
    // half away from zero; raw is nonnegative
    let mut k = libm::floor(raw);
    if raw - k >= 0.5 {
        k += 1.0;
    }
    let mut k = k as usize;
    if k < 1 {
        k = 1;
    }
    if k > len {
        k = len;
    }
    k
}

/// Repeatedly scans `pool` for the highest `s` (lowest index on ties) not
/// yet taken, `count` times.
fn top_by_scan(pool: &[usize], s: &[f64], count: usize) -> Vec<usize> {
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    while out.len() < count && out.len() < pool.len() {
        let mut best: Option<usize> = None;
        for p in 0..pool.len() {
            if taken[p] {
                continue;
            }
            best = match best {
                None => Some(p),
                Some(b) => {
                    let (i, j) = (pool[p], pool[b]);
                    if s[i] > s[j] || (s[i] == s[j] && i < j) {
                        Some(p)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(pool[b]);
    }
    out
}

fn candidates(s: &[f64], remaining: &[usize], k_rem: usize, cfg: &PruneConfig) -> Vec<usize> {
    let cap = match cfg.cap_m {
        Some(m) if m < remaining.len() => m,
        _ => remaining.len(),
    };
    let m_rem = if k_rem > cap { k_rem } else { cap };

    let mut c: Vec<usize>;
    if cfg.tau <= 0.0 {
        c = remaining.to_vec();
    } else {
        c = Vec::new();
        for &i in remaining {
            if s[i] >= cfg.tau {
                c.push(i);
            }
        }
        if c.len() < k_rem {
            c = top_by_scan(remaining, s, m_rem);
        }
    }

    let mut limit = c.len();
    if m_rem < limit {
        limit = m_rem;
    }
    if let Some(beta) = cfg.beta {
        let b = libm::ceil(beta * k_rem as f64) as usize;
        if b < limit {
            limit = b;
        }
    }
    top_by_scan(&c, s, limit)
}

/// Reference version of [`crate::greedy_select`].
pub fn oracle_prune(frame: &FeatureMatrix, q_hat: &QueryEmbedding, cfg: &PruneConfig) -> Result<Selection> {
    cfg.validate()?;
    if q_hat.vector.len() != frame.cols() {
        return Err(Error::DimensionMismatch { expected: frame.cols(), found: q_hat.vector.len() });
    }
    let no_text = q_hat.is_no_text();
    if q_hat.degenerate && !no_text {
        return Err(Error::DegenerateQuery);
    }
    let alpha = if no_text { 0.0 } else { cfg.alpha };

    let x = normalized_tokens(frame, cfg.eps);
    let n = x.len();
    let mut s = vec![0.0; n];
    for i in 0..n {
        s[i] = inner(&x[i], &q_hat.vector);
    }
    let k = budget(cfg.r, n);

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut chosen: Vec<usize> = Vec::new();

    let c = candidates(&s, &remaining, k, cfg);
    let mut first = c[0];
    for &i in &c {
        if s[i] > s[first] || (s[i] == s[first] && i < first) {
            first = i;
        }
    }
    chosen.push(first);
    remaining.retain(|&i| i != first);

    while chosen.len() < k {
        let k_rem = k - chosen.len();
        let mut c = candidates(&s, &remaining, k_rem, cfg);
        if c.is_empty() {
            c = remaining.clone();
        }
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for &i in &c {
            let mut nearest = f64::INFINITY;
            for &u in &chosen {
                let d = cosine_dissimilarity(&x[u], &x[i]);
                if d < nearest {
                    nearest = d;
                }
            }
            let score = nearest + alpha * s[i];
            if best == usize::MAX || score > best_score || (score == best_score && i < best) {
                best = i;
                best_score = score;
            }
        }
        chosen.push(best);
        remaining.retain(|&i| i != best);
    }

    let mut kept = chosen.clone();
    // insertion sort
    for a in 1..kept.len() {
        let mut b = a;
        while b > 0 && kept[b - 1] > kept[b] {
            kept.swap(b - 1, b);
            b -= 1;
        }
    }
    Ok(Selection { budget: kept.len(), kept, relevance: s, selection_order: chosen })
}

/// Subset objective `min_{i != j} D_ij + alpha * sum s_i`, with the min term
/// taken as zero for fewer than two members.
pub fn oracle_objective(frame: &FeatureMatrix, q_hat: &QueryEmbedding, alpha: f64, subset: &[usize], eps: f64) -> f64 {
    let x = normalized_tokens(frame, eps);
    objective_on(&x, &q_hat.vector, alpha, subset)
}

fn objective_on(x: &[Vec<f64>], q: &[f64], alpha: f64, subset: &[usize]) -> f64 {
    let mut min_d = f64::INFINITY;
    let mut rel = 0.0;
    for a in 0..subset.len() {
        rel += inner(&x[subset[a]], q);
        for b in 0..subset.len() {
            if a != b {
                let d = cosine_dissimilarity(&x[subset[a]], &x[subset[b]]);
                if d < min_d {
                    min_d = d;
                }
            }
        }
    }
    if subset.len() < 2 {
        min_d = 0.0;
    }
    min_d + alpha * rel
}

/// Enumerates every `k`-subset and returns the one maximizing the subset
/// objective (lexicographically smallest on ties) with its value.
pub fn oracle_exhaustive_objective(
    frame: &FeatureMatrix,
    q_hat: &QueryEmbedding,
    alpha: f64,
    k: usize,
    eps: f64,
) -> Result<(Vec<usize>, f64)> {
    let n = frame.rows();
    if n > MAX_EXHAUSTIVE {
        return Err(Error::TooLargeForEnumeration { max: MAX_EXHAUSTIVE, found: n });
    }
    if k < 2 || k > n {
        return Err(Error::Config("exhaustive search needs 2 <= k <= L"));
    }
    if q_hat.vector.len() != frame.cols() {
        return Err(Error::DimensionMismatch { expected: frame.cols(), found: q_hat.vector.len() });
    }
    let x = normalized_tokens(frame, eps);

    // combinations in lexicographic order
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = idx.clone();
    let mut best_val = objective_on(&x, &q_hat.vector, alpha, &idx);
    loop {
        let mut p = k;
        while p > 0 && idx[p - 1] == n - k + p - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        idx[p - 1] += 1;
        for t in p..k {
            idx[t] = idx[t - 1] + 1;
        }
        let v = objective_on(&x, &q_hat.vector, alpha, &idx);
        if v > best_val {
            best_val = v;
            best = idx.clone();
        }
    }
    Ok((best, best_val))
}
