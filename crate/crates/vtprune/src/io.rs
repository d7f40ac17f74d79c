//! Tensor inputs and result documents on disk.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vtprune_core::{
    gather_kept, CostModelSpec, CostReport, FeatureMatrix, PruneConfig, Selection, VideoFeatures, Weighting,
};

use crate::error::{Error, Result};
use crate::npy::{self, NpyArray, NpyError};

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    npy::read_array(&mut BufReader::new(file)).map_err(|e| Error::npy(path, e))
}

pub fn write_npy(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    npy::write_array(&mut w, shape, data).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn rank_error(path: &Path, found: usize, expected: &'static str) -> Error {
    Error::npy(path, NpyError::ShapeRank { found, expected })
}

/// `L x C` gives one frame, `N x L x C` gives `N` frames.
pub fn read_features(path: &Path) -> Result<VideoFeatures> {
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [l, c] => Ok(VideoFeatures::single(FeatureMatrix::new(l, c, arr.data)?)),
        [n, l, c] => {
            let size = l * c;
            let frames = (0..n)
                .map(|i| FeatureMatrix::new(l, c, arr.data[i * size..(i + 1) * size].to_vec()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(VideoFeatures::new(frames)?)
        }
        _ => Err(rank_error(path, arr.shape.len(), "2 or 3")),
    }
}

/// Expands directories into their `.npy` files sorted by file name.
pub fn resolve_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "npy"))
                .collect();
            files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no feature files given".into()));
    }
    Ok(out)
}

/// One file: as [`read_features`]. Several files: each must be a 2-D frame;
/// frames may differ in token count.
pub fn read_feature_files(paths: &[PathBuf]) -> Result<VideoFeatures> {
    if let [single] = paths {
        return read_features(single);
    }
    let mut frames = Vec::with_capacity(paths.len());
    for path in paths {
        let arr = read_npy(path)?;
        match arr.shape[..] {
            [l, c] => frames.push(FeatureMatrix::new(l, c, arr.data)?),
            _ => return Err(rank_error(path, arr.shape.len(), "2 (one frame per file)")),
        }
    }
    Ok(VideoFeatures::new(frames)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryInput {
    /// `J x C` prompt-token embeddings to aggregate.
    Tokens(FeatureMatrix),
    /// A precomputed query vector, used as-is after normalization.
    Direction(Vec<f64>),
}

pub fn read_query_embeddings(path: &Path) -> Result<QueryInput> {
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [c] => {
            FeatureMatrix::new(1, c, arr.data.clone())?;
            Ok(QueryInput::Direction(arr.data))
        }
        [j, c] => Ok(QueryInput::Tokens(FeatureMatrix::new(j, c, arr.data)?)),
        _ => Err(rank_error(path, arr.shape.len(), "1 or 2")),
    }
}

/// Rank-1 array, e.g. explicit per-token query weights.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [_] => Ok(arr.data),
        _ => Err(rank_error(path, arr.shape.len(), "1")),
    }
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [r, c] => Ok(FeatureMatrix::new(r, c, arr.data)?),
        _ => Err(rank_error(path, arr.shape.len(), "2")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub selection: PruneConfig,
    pub weighting: Weighting,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl RelevanceStats {
    pub fn of(s: &[f64]) -> Self {
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        Self { min, max, mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_index: usize,
    pub num_tokens: usize,
    pub budget: usize,
    pub kept_indices: Vec<usize>,
    pub selection_order: Vec<usize>,
    pub relevance_stats: RelevanceStats,
}

impl FrameResult {
    pub fn new(frame_index: usize, sel: &Selection) -> Self {
        Self {
            frame_index,
            num_tokens: sel.relevance.len(),
            budget: sel.budget,
            kept_indices: sel.kept.clone(),
            selection_order: sel.selection_order.clone(),
            relevance_stats: RelevanceStats::of(&sel.relevance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub model: CostModelSpec,
    #[serde(flatten)]
    pub report: CostReport,
}

/// The JSON document written by `vtprune prune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub config: ConfigEcho,
    pub frames: Vec<FrameResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_report: Option<FlopsReport>,
}

impl ResultDocument {
    pub fn new(config: ConfigEcho, selections: &[Selection]) -> Self {
        let frames = selections.iter().enumerate().map(|(i, s)| FrameResult::new(i, s)).collect();
        Self { config, frames, timing_ms: None, flops_report: None }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result document serializes");
        s.push('\n');
        s
    }
}

pub fn write_selection(doc: &ResultDocument, path: &Path) -> Result<()> {
    fs::write(path, doc.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_selection(path: &Path) -> Result<ResultDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

/// Writes the kept rows of every frame and returns the files written.
///
/// A single frame becomes a `k x C` array. Several frames with the same budget
/// become one `N x k x C` array; otherwise each frame goes to
/// `<stem>_frame<n>.npy` next to `path`.
pub fn write_pruned_features(video: &VideoFeatures, selections: &[Selection], path: &Path) -> Result<Vec<PathBuf>> {
    let gathered =
        video.frames().iter().zip(selections).map(|(f, s)| gather_kept(f, s)).collect::<Result<Vec<_>, _>>()?;
    let cols = video.cols();
    if let [one] = &gathered[..] {
        write_npy(path, &[one.rows(), cols], one.as_slice())?;
        return Ok(vec![path.to_path_buf()]);
    }
    let k = gathered[0].rows();
    if gathered.iter().all(|g| g.rows() == k) {
        let data: Vec<f64> = gathered.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
        write_npy(path, &[gathered.len(), k, cols], &data)?;
        return Ok(vec![path.to_path_buf()]);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pruned");
    let mut written = Vec::with_capacity(gathered.len());
    for (i, g) in gathered.iter().enumerate() {
        let p = path.with_file_name(format!("{stem}_frame{i}.npy"));
        write_npy(&p, &[g.rows(), cols], g.as_slice())?;
        written.push(p);
    }
    Ok(written)
}
