//! Online keyframe acquisition and mean-teacher adaptation over embedding
//! streams.
//!
//! The crate is organised bottom-up:
//!
//! - [`stream`]: frames, detections and the JSON Lines stream format.
//! - [`cluster`]: incremental cosine clustering.
//! - [`acquisition`]: the two-stage keyframe selector.
//! - [`teacher`]: teacher/student updates, alignment loss and checkpoints.
//! - [`toy`]: a small linear model that implements [`teacher::AdaptableModel`].
//! - [`engine`]: the per-frame loop that ties the pieces together.
//! - [`sim`]: synthetic domain-shift streams and the ablation runner.
//! - [`cli`]: the `streamadapt` command-line front end.

pub mod acquisition;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod engine;
pub mod error;
pub mod sim;
pub mod stream;
pub mod teacher;
pub mod toy;

pub use error::{Error, Result};
