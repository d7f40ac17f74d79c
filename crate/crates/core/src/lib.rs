//! Training-free visual token pruning for multimodal language models.
//!
//! Each frame's patch tokens are scored against a prompt-derived query
//! direction and a per-frame budget of tokens is picked greedily, trading
//! query relevance against max-min cosine diversity. Pruning happens in the
//! vision encoder's feature space, before the vision-language projector.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the parallel
//! frame driver and the command line live in the `vtprune` crate.
//!
//! ```
//! use vtprune_core::{build_query, greedy_select, FeatureMatrix, PruneConfig, QuerySpec, Weighting};
//!
//! let frame = FeatureMatrix::new(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
//! let text = FeatureMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
//! let query = build_query(&QuerySpec::new(text, Weighting::Uniform)).unwrap();
//!
//! let cfg = PruneConfig::new(0.5).with_alpha(0.5).unbounded();
//! let sel = greedy_select(&frame, &query, &cfg).unwrap();
//! assert_eq!(sel.kept, vec![0, 1]);
//! ```

#![cfg_attr(not(test), no_std)]
// index loops mirror the matrix math more directly
#![allow(clippy::needless_range_loop)]

extern crate alloc;

mod config;
mod cost;
mod error;
mod matrix;
#[cfg(feature = "oracle")]
pub mod oracle;
mod query;
mod score;
mod select;

pub use config::{PruneConfig, TieBreak};
pub use cost::{layer_flops, pruned_cost, sweep, CostModelSpec, CostReport, DecoderPreset, SweepRow};
pub use error::{Error, Result};
pub use matrix::{dot, normalize_rows, FeatureMatrix, VideoFeatures, DEFAULT_EPS};
pub use query::{build_query, weights_for, QueryEmbedding, QuerySpec, Weighting, DEFAULT_GAMMA};
pub use score::{candidate_set, dissimilarity, relevance, Dissimilarity, ScoreState, DENSE_LIMIT};
pub use select::{
    compute_budget, gather_kept, greedy_select, prune_video, relevance_only, subset_objective, Selection,
};
