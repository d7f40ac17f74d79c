//! Frame-parallel pruning.

use std::time::Instant;

use rayon::prelude::*;
use vtprune_core::{greedy_select, prune_video, PruneConfig, QueryEmbedding, Selection, VideoFeatures};

use crate::error::{Error, Result};

/// Prunes every frame on up to `workers` threads (0 = all cores). Output is in
/// frame order and identical to the sequential [`prune_video`].
pub fn prune_video_parallel(
    video: &VideoFeatures,
    query: &QueryEmbedding,
    cfg: &PruneConfig,
    workers: usize,
) -> Result<Vec<Selection>> {
    if workers == 1 || video.len() == 1 {
        return Ok(prune_video(video, query, cfg)?);
    }
    if video.cols() != query.dim() {
        return Err(vtprune_core::Error::DimensionMismatch { expected: video.cols(), found: query.dim() }.into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let out = pool
        .install(|| video.frames().par_iter().map(|f| greedy_select(f, query, cfg)).collect::<Result<Vec<_>, _>>())?;
    Ok(out)
}

/// Like [`prune_video_parallel`], also returning wall-clock milliseconds.
pub fn prune_timed(
    video: &VideoFeatures,
    query: &QueryEmbedding,
    cfg: &PruneConfig,
    workers: usize,
) -> Result<(Vec<Selection>, f64)> {
    let start = Instant::now();
    let sel = prune_video_parallel(video, query, cfg, workers)?;
    Ok((sel, start.elapsed().as_secs_f64() * 1e3))
}
