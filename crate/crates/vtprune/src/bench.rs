//! Synthetic benchmark comparing selection strategies.
//!
//! Frames mix clustered background tokens, "planted" tokens aligned with a
//! hidden query direction, and exact duplicates of earlier tokens. Each
//! strategy is scored by planted-token recall and by the mean pairwise cosine
//! dissimilarity of what it keeps.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vtprune_core::{
    dissimilarity, gather_kept, greedy_select, normalize_rows, relevance_only, FeatureMatrix, PruneConfig,
    QueryEmbedding, Selection, VideoFeatures, Weighting, DEFAULT_EPS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub frames: usize,
    pub tokens: usize,
    pub dims: usize,
    /// Probability that a token is an exact copy of an earlier one.
    pub redundancy: f64,
    /// Probability that a fresh token is planted near the query.
    pub planted_fraction: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self { seed: 0, frames: 4, tokens: 256, dims: 64, redundancy: 0.2, planted_fraction: 0.1 }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.tokens == 0 || self.dims == 0 {
            return Err(Error::Usage("frames, tokens and dims must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.redundancy) {
            return Err(Error::Usage("redundancy must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.planted_fraction) {
            return Err(Error::Usage("planted fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub video: VideoFeatures,
    pub query: QueryEmbedding,
    /// `planted[n][i]` marks planted tokens of frame `n`.
    pub planted: Vec<Vec<bool>>,
}

fn gaussian(rng: &mut ChaCha8Rng, dims: usize, scale: f64) -> Vec<f64> {
    (0..dims).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(DEFAULT_EPS);
    v.into_iter().map(|x| x / n).collect()
}

pub fn generate(p: &GeneratorParams) -> Result<SyntheticData> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let c = p.dims;
    let noise = 1.0 / (c as f64).sqrt();
    let query = unit(gaussian(&mut rng, c, 1.0));

    let mut frames = Vec::with_capacity(p.frames);
    let mut planted = Vec::with_capacity(p.frames);
    for _ in 0..p.frames {
        let clusters: Vec<Vec<f64>> = (0..(p.tokens / 32).max(2)).map(|_| unit(gaussian(&mut rng, c, 1.0))).collect();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p.tokens);
        let mut marks = Vec::with_capacity(p.tokens);
        for t in 0..p.tokens {
            if t > 0 && rng.random::<f64>() < p.redundancy {
                let src = rng.random_range(0..t);
                rows.push(rows[src].clone());
                marks.push(marks[src]);
                continue;
            }
            let is_planted = rng.random::<f64>() < p.planted_fraction;
            let base = if is_planted { &query } else { &clusters[rng.random_range(0..clusters.len())] };
            let spread = if is_planted { 0.7 } else { 0.5 };
            let jitter = gaussian(&mut rng, c, spread * noise);
            rows.push(base.iter().zip(jitter).map(|(b, j)| b + j).collect());
            marks.push(is_planted);
        }
        frames.push(FeatureMatrix::from_rows(&rows)?);
        planted.push(marks);
    }
    Ok(SyntheticData {
        video: VideoFeatures::new(frames)?,
        query: QueryEmbedding::from_direction(&query, Weighting::Uniform, DEFAULT_EPS),
        planted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Max-min diversity without text guidance.
    DiversityOnly,
    /// Top-k by relevance.
    RelevanceOnly,
    /// Relevance plus diversity.
    Combined,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::DiversityOnly, Strategy::RelevanceOnly, Strategy::Combined];

    fn select(self, frame: &FeatureMatrix, query: &QueryEmbedding, cfg: &PruneConfig) -> Result<Selection> {
        let sel = match self {
            Strategy::DiversityOnly => {
                let cfg = cfg.with_alpha(0.0).with_tau(0.0).unbounded();
                greedy_select(frame, &QueryEmbedding::no_text(frame.cols()), &cfg)?
            }
            Strategy::RelevanceOnly => relevance_only(frame, query, cfg)?,
            Strategy::Combined => greedy_select(frame, query, cfg)?,
        };
        Ok(sel)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::DiversityOnly => "diversity-only",
            Strategy::RelevanceOnly => "relevance-only",
            Strategy::Combined => "combined",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diversity-only" => Ok(Strategy::DiversityOnly),
            "relevance-only" => Ok(Strategy::RelevanceOnly),
            "combined" => Ok(Strategy::Combined),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub strategy: Strategy,
    pub r: f64,
    pub recall: f64,
    pub mean_pairwise_d: f64,
    pub micros: u128,
}

fn mean_pairwise(frame: &FeatureMatrix, sel: &Selection) -> Result<Option<f64>> {
    let k = sel.kept.len();
    if k < 2 {
        return Ok(None);
    }
    let kept = normalize_rows(&gather_kept(frame, sel)?, DEFAULT_EPS)?;
    let d = dissimilarity(&kept);
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += d[i * k + j];
        }
    }
    Ok(Some(total / (k * (k - 1) / 2) as f64))
}

/// Runs every strategy at every keep ratio. `cfg.r` is overridden per row.
pub fn run(data: &SyntheticData, strategies: &[Strategy], ratios: &[f64], cfg: &PruneConfig) -> Result<Vec<BenchRow>> {
    let total_planted: usize = data.planted.iter().map(|m| m.iter().filter(|&&p| p).count()).sum();
    let mut rows = Vec::new();
    for &strategy in strategies {
        for &r in ratios {
            let cfg = PruneConfig { r, ..*cfg };
            let mut hits = 0usize;
            let mut spread = Vec::new();
            let mut micros = 0u128;
            for (frame, marks) in data.video.frames().iter().zip(&data.planted) {
                let start = Instant::now();
                let sel = strategy.select(frame, &data.query, &cfg)?;
                micros += start.elapsed().as_micros();
                hits += sel.kept.iter().filter(|&&i| marks[i]).count();
                spread.extend(mean_pairwise(frame, &sel)?);
            }
            rows.push(BenchRow {
                strategy,
                r,
                recall: if total_planted == 0 { 1.0 } else { hits as f64 / total_planted as f64 },
                mean_pairwise_d: if spread.is_empty() { 0.0 } else { spread.iter().sum::<f64>() / spread.len() as f64 },
                micros,
            });
        }
    }
    Ok(rows)
}

/// RFC 4180 CSV; the timing column is dropped when `timing` is false so the
/// output depends only on the inputs.
pub fn to_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut out = String::from("strategy,r,recall,mean_pairwise_d");
    out.push_str(if timing { ",micros\r\n" } else { "\r\n" });
    for row in rows {
        write!(out, "{},{},{:.6},{:.6}", row.strategy, row.r, row.recall, row.mean_pairwise_d).unwrap();
        if timing {
            write!(out, ",{}", row.micros).unwrap();
        }
        out.push_str("\r\n");
    }
    out
}
