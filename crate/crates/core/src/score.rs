//! Per-token relevance, pairwise cosine dissimilarity and the candidate
//! pre-filter.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::matrix::{dot, normalize_into, FeatureMatrix};
use crate::query::QueryEmbedding;

/// Frames with more tokens than this compute dissimilarity rows on demand
/// instead of storing the full `L x L` matrix.
pub const DENSE_LIMIT: usize = 4096;

#[inline]
fn pair(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

/// `s_i = <x_hat_i, q_hat>` for every token.
pub fn relevance(x_hat: &FeatureMatrix, q_hat: &[f64]) -> Result<Vec<f64>> {
    if x_hat.cols() != q_hat.len() {
        return Err(Error::DimensionMismatch { expected: x_hat.cols(), found: q_hat.len() });
    }
    Ok(x_hat.iter_rows().map(|row| dot(row, q_hat)).collect())
}

/// Dense row-major `L x L` matrix of `1 - <x_hat_i, x_hat_j>`, clamped to
/// `[0, 2]`, with an exactly zero diagonal.
pub fn dissimilarity(x_hat: &FeatureMatrix) -> Vec<f64> {
    let n = x_hat.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let xi = x_hat.row(i);
        for j in (i + 1)..n {
            d[i * n + j] = pair(xi, x_hat.row(j));
        }
    }
    // mirror in tiles so the strided side stays in cache
    const TILE: usize = 64;
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                for j in bj.max(i + 1)..(bj + TILE).min(n) {
                    d[j * n + i] = d[i * n + j];
                }
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dissimilarity {
    Dense(Vec<f64>),
    /// Rows are recomputed from the normalized tokens when requested.
    Implicit,
}

/// Everything the greedy solver needs about one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    pub normalized: FeatureMatrix,
    pub relevance: Vec<f64>,
    pub dissimilarity: Dissimilarity,
}

impl ScoreState {
    pub fn compute(frame: &FeatureMatrix, query: &QueryEmbedding, eps: f64) -> Result<Self> {
        Self::compute_with(frame, query, eps, frame.rows() <= DENSE_LIMIT)
    }

    /// Like [`ScoreState::compute`] but with an explicit storage choice.
    pub fn compute_with(frame: &FeatureMatrix, query: &QueryEmbedding, eps: f64, dense: bool) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config("eps must be positive and finite"));
        }
        let mut data = Vec::with_capacity(frame.rows() * frame.cols());
        for row in frame.iter_rows() {
            normalize_into(row, eps, &mut data);
        }
        let normalized = FeatureMatrix::new(frame.rows(), frame.cols(), data)?;
        let relevance = relevance(&normalized, &query.vector)?;
        let dissimilarity =
            if dense { Dissimilarity::Dense(dissimilarity(&normalized)) } else { Dissimilarity::Implicit };
        Ok(Self { normalized, relevance, dissimilarity })
    }

    pub fn len(&self) -> usize {
        self.relevance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevance.is_empty()
    }

    /// `D[i, j]`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.dissimilarity {
            Dissimilarity::Dense(d) => d[i * self.len() + j],
            Dissimilarity::Implicit if i == j => 0.0,
            Dissimilarity::Implicit => pair(self.normalized.row(i), self.normalized.row(j)),
        }
    }

    /// Lowers `min_dist[i]` to `D[u, i]` for every `i` in `targets`.
    pub(crate) fn relax(&self, u: usize, targets: &[usize], min_dist: &mut [f64]) {
        match &self.dissimilarity {
            Dissimilarity::Dense(d) => {
                let row = &d[u * self.len()..(u + 1) * self.len()];
                for &i in targets {
                    min_dist[i] = min_dist[i].min(row[i]);
                }
            }
            Dissimilarity::Implicit => {
                let xu = self.normalized.row(u);
                for &i in targets {
                    let v = if i == u { 0.0 } else { pair(xu, self.normalized.row(i)) };
                    min_dist[i] = min_dist[i].min(v);
                }
            }
        }
    }
}

/// Descending by score, ascending by index on ties.
#[inline]
pub(crate) fn by_score_desc(s: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

/// The `k` best members of `pool` by `s`, best first.
pub(crate) fn top_k(mut pool: Vec<usize>, s: &[f64], k: usize) -> Vec<usize> {
    let cmp = by_score_desc(s);
    if k == 0 {
        return Vec::new();
    }
    if k < pool.len() {
        pool.select_nth_unstable_by(k - 1, &cmp);
        pool.truncate(k);
    }
    pool.sort_unstable_by(&cmp);
    pool
}

/// Candidate pool for one greedy step, ordered by descending relevance.
///
/// `need` is the number of picks still owed. With `tau <= 0` every remaining
/// token qualifies; otherwise tokens with `s_i >= tau` do, falling back to the
/// top `M_rem = max(need, min(M, |remaining|))` by relevance when fewer than
/// `need` pass. The pool is then cut to `min(|pool|, M_rem, ceil(beta * need))`.
pub fn candidate_set(
    s: &[f64],
    remaining: &[usize],
    tau: f64,
    need: usize,
    cap_m: Option<usize>,
    beta: Option<f64>,
) -> Vec<usize> {
    let m_rem = need.max(cap_m.unwrap_or(usize::MAX).min(remaining.len()));
    let pool: Vec<usize> = if tau <= 0.0 {
        remaining.to_vec()
    } else {
        let passing: Vec<usize> = remaining.iter().copied().filter(|&i| s[i] >= tau).collect();
        if passing.len() < need {
            top_k(remaining.to_vec(), s, m_rem)
        } else {
            passing
        }
    };
    let beta_cap = match beta {
        Some(b) => libm::ceil(b * need as f64) as usize,
        None => usize::MAX,
    };
    let limit = pool.len().min(m_rem).min(beta_cap);
    top_k(pool, s, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Weighting;
    use proptest::prelude::*;

    fn unit(rows: &[[f64; 2]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn relevance_examples() {
        let x = unit(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(relevance(&x, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);

        let q = QueryEmbedding::from_direction(&[1.0, 0.0], Weighting::Uniform, 1e-12);
        let st = ScoreState::compute(&unit(&[[1.0, 1.0]]), &q, 1e-12).unwrap();
        assert!((st.relevance[0] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn relevance_dimension_mismatch() {
        let x = unit(&[[1.0, 0.0]]);
        assert!(matches!(relevance(&x, &[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn dissimilarity_examples() {
        let d = dissimilarity(&unit(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]));
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 2.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn zero_rows_are_far_from_everything() {
        let q = QueryEmbedding::from_direction(&[1.0, 0.0], Weighting::Uniform, 1e-12);
        let st = ScoreState::compute(&unit(&[[0.0, 0.0], [0.0, 0.0], [2.0, 0.0]]), &q, 1e-12).unwrap();
        assert_eq!(st.relevance[0], 0.0);
        assert_eq!(st.get(0, 0), 0.0);
        assert_eq!(st.get(0, 1), 1.0);
        assert_eq!(st.get(0, 2), 1.0);
    }

    #[test]
    fn candidate_default_regime() {
        let s: Vec<f64> = (0..10).map(|i| ((i * 7) % 10) as f64 / 10.0).collect();
        let remaining: Vec<usize> = (0..10).collect();
        let c = candidate_set(&s, &remaining, 0.0, 2, Some(64), Some(3.0));
        assert_eq!(c.len(), 6);
        let mut expected = remaining.clone();
        expected.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
        assert_eq!(c, expected[..6]);
    }

    #[test]
    fn candidate_fallback() {
        let s = [0.1, 0.2, 0.3];
        let c = candidate_set(&s, &[0, 1, 2], 0.9, 2, Some(64), Some(3.0));
        assert_eq!(c, vec![2, 1, 0]);
    }

    #[test]
    fn candidate_unbounded_keeps_all() {
        let s = [0.5, -0.2, 0.9, 0.0];
        let mut c = candidate_set(&s, &[0, 1, 2, 3], -1.0, 4, None, None);
        c.sort();
        assert_eq!(c, vec![0, 1, 2, 3]);
    }

    #[test]
    fn candidate_threshold_without_floor() {
        // three pass tau; need 2; M = 1 caps the pool at M_rem = max(2, 1) = 2
        let s = [0.9, 0.8, 0.7, 0.1];
        let c = candidate_set(&s, &[0, 1, 2, 3], 0.5, 2, Some(1), None);
        assert_eq!(c, vec![0, 1]);
        // fractional beta rounds up: ceil(1.5 * 1) = 2
        let c = candidate_set(&s, &[0, 1, 2, 3], 0.5, 1, None, Some(1.5));
        assert_eq!(c, vec![0, 1]);
    }

    #[test]
    fn candidate_ties_prefer_low_index() {
        let s = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(candidate_set(&s, &[3, 1, 2, 0], 0.0, 1, None, Some(2.0)), vec![0, 1]);
    }

    #[test]
    fn dense_equals_gram_product() {
        let x =
            FeatureMatrix::from_rows(&[[0.3, -1.0, 2.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-0.3, 1.0, -2.0]]).unwrap();
        let xh = crate::normalize_rows(&x, 1e-12).unwrap();
        let d = dissimilarity(&xh);
        let n = xh.rows();
        let c = xh.cols();
        // X X^T via a column-major accumulation, a different summation path
        let mut g = vec![0.0; n * n];
        for k in 0..c {
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += xh.row(i)[k] * xh.row(j)[k];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!((d[i * n + j] - (1.0 - g[i * n + j]).clamp(0.0, 2.0)).abs() <= 1e-9);
                }
            }
        }
    }

    fn frame() -> impl Strategy<Value = FeatureMatrix> {
        (1usize..12, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c).prop_map(move |d| FeatureMatrix::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn score_state_bounds(x in frame(), qraw in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let q = QueryEmbedding::from_direction(&qraw[..x.cols()], Weighting::Uniform, 1e-12);
            let st = ScoreState::compute(&x, &q, 1e-12).unwrap();
            let n = x.rows();
            for i in 0..n {
                prop_assert!(st.relevance[i] >= -1.0 - 1e-9 && st.relevance[i] <= 1.0 + 1e-9);
                prop_assert!(st.get(i, i).abs() <= 1e-9);
                for j in 0..n {
                    let v = st.get(i, j);
                    prop_assert!((-1e-9..=2.0 + 1e-9).contains(&v));
                    prop_assert!((v - st.get(j, i)).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn dense_and_implicit_agree(x in frame()) {
            let q = QueryEmbedding::no_text(x.cols());
            let a = ScoreState::compute_with(&x, &q, 1e-12, true).unwrap();
            let b = ScoreState::compute_with(&x, &q, 1e-12, false).unwrap();
            for i in 0..x.rows() {
                for j in 0..x.rows() {
                    prop_assert_eq!(a.get(i, j), b.get(i, j));
                }
            }
        }

        #[test]
        fn relevance_ignores_positive_scale(x in frame(), c in 0.01f64..100.0) {
            let q = QueryEmbedding::from_direction(&[0.3, -0.2, 0.9, 0.1, 0.0, 0.5][..x.cols()], Weighting::Uniform, 1e-12);
            let a = ScoreState::compute(&x, &q, 1e-12).unwrap();
            let b = ScoreState::compute(&x.scaled(c).unwrap(), &q, 1e-12).unwrap();
            for (u, v) in a.relevance.iter().zip(&b.relevance) {
                prop_assert!((u - v).abs() <= 1e-6);
            }
        }

        #[test]
        fn candidate_set_contract(
            s in proptest::collection::vec(-1.0f64..1.0, 1..30),
            tau in -1.0f64..1.0,
            need_frac in 0.0f64..1.0,
            keep_mask in proptest::collection::vec(any::<bool>(), 30),
            cap_m in proptest::option::of(1usize..40),
            beta in proptest::option::of(1.0f64..5.0),
        ) {
            let mut remaining: Vec<usize> = (0..s.len()).filter(|&i| keep_mask[i]).collect();
            if remaining.is_empty() {
                remaining.push(0);
            }
            let need = 1 + ((remaining.len() - 1) as f64 * need_frac) as usize;
            let c = candidate_set(&s, &remaining, tau, need, cap_m, beta);
            prop_assert!(c.len() >= need);
            let mut sorted = c.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), c.len());
            prop_assert!(c.iter().all(|i| remaining.contains(i)));
            prop_assert!(c.windows(2).all(|w| s[w[0]] >= s[w[1]]));
        }

        #[test]
        fn raising_tau_shrinks_threshold_set(
            s in proptest::collection::vec(-1.0f64..1.0, 1..30), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let pass = |t: f64| s.iter().filter(|&&v| v >= t).count();
            prop_assert!(pass(hi) <= pass(lo));
            // with a single pick owed and no caps, the pool is exactly the pass set
            let remaining: Vec<usize> = (0..s.len()).collect();
            let a = candidate_set(&s, &remaining, hi.max(1e-9), 1, None, None);
            let b = candidate_set(&s, &remaining, lo.max(1e-9), 1, None, None);
            if pass(lo.max(1e-9)) >= 1 && pass(hi.max(1e-9)) >= 1 {
                prop_assert!(a.len() <= b.len());
            }
        }
    }
}
