//! Scale-selective extended local binary pattern (SSELBP) texture
//! descriptors with a chi-square nearest-neighbor benchmark harness.
//!
//! The pipeline normalizes a grayscale image to zero mean and unit
//! variance, builds a Gaussian scale space, computes joint CI/NI/RD
//! extended-LBP histograms over several sampling radii at each level, and
//! pools the per-level histogram vectors by elementwise maximum. Features
//! are compared with the chi-square distance and classified by nearest
//! neighbor; the bench module adds dataset ingestion and a repeated
//! stratified split protocol around them.
//!
//! The `sselbp` binary exposes the pipeline as `extract`, `classify`, and
//! `benchmark` subcommands.

pub mod bench;
pub mod classifier;
pub mod descriptor;
pub mod elbp;
mod error;
pub mod imgio;
pub mod scalespace;

pub use error::{Error, Result};
