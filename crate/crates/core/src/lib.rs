//! Online multi-text video tracking.
//!
//! The pipeline follows tracking-by-detection: per-frame candidate boxes
//! are associated to live trajectories through a gated minimum-cost
//! assignment over a fused distance (appearance embedding, IOU and
//! rectangle morphology), while a correlation complementer searches the
//! current frame near every previous-frame instance to recover boxes the
//! detector missed. The crate also ships a CLEAR-MOT/IDF1 evaluation
//! suite and a deterministic synthetic scenario generator used by the
//! benchmark harness.

pub mod ablation;
pub mod association;
pub mod embeddings;
mod error;
pub mod geometry;
pub mod io;
pub mod localization;
pub mod metrics;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
