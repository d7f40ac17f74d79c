use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor applied to row norms before division.
pub const DEFAULT_EPS: f64 = 1e-12;

/// Row-major `rows x cols` matrix of finite `f64`, one row per token in
/// original patch order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("matrix needs at least one row and one column"));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape("data length does not equal rows * cols"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Shape("ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.iter().map(|v| v * factor).collect())
    }
}

/// The frames of one video (a single frame for an image).
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    frames: Vec<FeatureMatrix>,
}

impl VideoFeatures {
    pub fn new(frames: Vec<FeatureMatrix>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Shape("video needs at least one frame"));
        };
        let cols = first.cols();
        if let Some(bad) = frames.iter().find(|f| f.cols() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: bad.cols() });
        }
        Ok(Self { frames })
    }

    pub fn single(frame: FeatureMatrix) -> Self {
        Self { frames: alloc::vec![frame] }
    }

    pub fn frames(&self) -> &[FeatureMatrix] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Channel count shared by all frames.
    pub fn cols(&self) -> usize {
        self.frames[0].cols()
    }

    pub fn into_frames(self) -> Vec<FeatureMatrix> {
        self.frames
    }
}

/// Left-to-right accumulated inner product. The fixed summation order keeps
/// argmax decisions reproducible across platforms.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize_into(row: &[f64], eps: f64, out: &mut Vec<f64>) {
    let norm = libm::sqrt(dot(row, row));
    let denom = if norm > eps { norm } else { eps };
    out.extend(row.iter().map(|v| v / denom));
}

/// Divides each row by `max(||row||_2, eps)`. Rows at or below `eps` in norm
/// stay near zero instead of blowing up.
pub fn normalize_rows(x: &FeatureMatrix, eps: f64) -> Result<FeatureMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config("eps must be positive and finite"));
    }
    let mut data = Vec::with_capacity(x.rows * x.cols);
    for row in x.iter_rows() {
        normalize_into(row, eps, &mut data);
    }
    FeatureMatrix::new(x.rows, x.cols, data)
}
