//! File formats, frame-parallel driver, synthetic benchmark and command line
//! for [`vtprune_core`].

pub mod bench;
pub mod cli;
pub mod driver;
pub mod error;
pub mod io;
pub mod npy;

pub use driver::{prune_timed, prune_video_parallel};
pub use error::{Error, Result};
