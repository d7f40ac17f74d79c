//! Dominant-term FLOPs model for a decoder-only language model.
//!
//! One layer at sequence length `n` costs `g(n) = 4nd^2 + 2n^2d + 2ndm`
//! (projections, attention scores and the FFN). With pruning taking effect
//! after layer `K`, the first `K` layers see the full sequence and the
//! remaining `T - K` the pruned one.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::select::compute_budget;

/// `g(n)` for hidden size `d` and FFN width `m`.
pub fn layer_flops(n: u64, d: u64, m: u64) -> f64 {
    let (n, d, m) = (n as f64, d as f64, m as f64);
    4.0 * n * d * d + 2.0 * n * n * d + 2.0 * n * d * m
}

/// Decoder dimensions shared by a family of models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoderPreset {
    pub d: u64,
    pub m: u64,
    pub layers: u64,
}

impl DecoderPreset {
    /// LLaMA/Vicuna-7B class decoders.
    pub const SEVEN_B: Self = Self { d: 4096, m: 11008, layers: 32 };

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "7b" | "7B" => Some(Self::SEVEN_B),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostModelSpec {
    pub d: u64,
    pub m: u64,
    /// Decoder layer count `T`.
    pub layers: u64,
    /// First layer that sees the pruned sequence; 0 means pruning happens
    /// before the decoder.
    pub k_layer: u64,
    pub text_tokens: u64,
    pub v_full: u64,
    pub v_pruned: u64,
}

impl CostModelSpec {
    pub fn from_preset(preset: DecoderPreset, text_tokens: u64, v_full: u64, v_pruned: u64) -> Self {
        Self { d: preset.d, m: preset.m, layers: preset.layers, k_layer: 0, text_tokens, v_full, v_pruned }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_layer > self.layers {
            return Err(Error::Config("pruning layer K exceeds layer count T"));
        }
        if self.v_pruned > self.v_full {
            return Err(Error::Config("pruned visual tokens exceed full visual tokens"));
        }
        Ok(())
    }

    pub fn n_full(&self) -> u64 {
        self.text_tokens + self.v_full
    }

    pub fn n_pruned(&self) -> u64 {
        self.text_tokens + self.v_pruned
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub flops_full: f64,
    pub flops_pruned: f64,
    /// `flops_pruned / flops_full`; 1 when the full cost is zero.
    pub ratio: f64,
    pub tflops_full: f64,
    pub tflops_pruned: f64,
}

pub fn pruned_cost(spec: &CostModelSpec) -> Result<CostReport> {
    spec.validate()?;
    let g_full = layer_flops(spec.n_full(), spec.d, spec.m);
    let g_pruned = layer_flops(spec.n_pruned(), spec.d, spec.m);
    let flops_full = spec.layers as f64 * g_full;
    let flops_pruned = spec.k_layer as f64 * g_full + (spec.layers - spec.k_layer) as f64 * g_pruned;
    let ratio = if flops_full > 0.0 { flops_pruned / flops_full } else { 1.0 };
    Ok(CostReport {
        flops_full,
        flops_pruned,
        ratio,
        tflops_full: flops_full / 1e12,
        tflops_pruned: flops_pruned / 1e12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub r: f64,
    pub v_pruned: u64,
    pub flops_full: f64,
    pub flops_pruned: f64,
    pub ratio: f64,
}

/// Evaluates the cost model at each keep ratio; `template.v_pruned` is
/// ignored. Rows come back sorted by ratio `r`.
pub fn sweep(template: &CostModelSpec, ratios: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(ratios.len());
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Config("sweep ratios must lie in (0, 1]"));
        }
        let v_pruned = compute_budget(r, template.v_full as usize) as u64;
        let report = pruned_cost(&CostModelSpec { v_pruned, ..*template })?;
        rows.push(SweepRow {
            r,
            v_pruned,
            flops_full: report.flops_full,
            flops_pruned: report.flops_pruned,
            ratio: report.ratio,
        });
    }
    rows.sort_by(|a, b| a.r.total_cmp(&b.r));
    Ok(rows)
}
