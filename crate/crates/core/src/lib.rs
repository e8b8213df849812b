//! Exact Bayesian inference for change-points in the dependence structure of
//! multivariate time-series.
//!
//! Each stationary segment is modelled by a spanning-tree graphical model with
//! conjugate Gaussian local distributions. Posteriors over change-points,
//! number of segments and per-edge structure are computed exactly by combining
//! a dynamic program over segmentations with Matrix-Tree summation over the
//! `p^(p-2)` spanning trees.
//!
//! The crate is `no_std` (with `alloc`): it holds the pure numerical engine.
//! IO, file formats and the command-line surface live in the companion
//! `treeseg` crate.
//!
//! Conventions:
//! - every likelihood, weight and partition function is carried in log-domain
//!   (`f64` holding the natural log of a positive quantity); probabilities are
//!   only exponentiated after normalization,
//! - time segments use the 1-based half-open convention `[s, t)` with
//!   boundaries in `1..=N+1`, so `[1, N+1)` is the whole series,
//! - variable (column) indices are 0-based.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dp;
pub mod dynamics;
pub mod error;
pub mod marginals;
pub mod math;
pub mod matrix;
pub mod segment;
pub mod tree;

pub use dp::{DpTables, KPrior, PosteriorSummary, Segmentation};
pub use dynamics::{EdgeStatusPosterior, EdgeTimeTensor, StructureComparisonPosterior};
pub use error::Error;
pub use marginals::{Backend, CumulativeStats, Dataset, MeanMode, PriorSpec, SegmentStats};
pub use matrix::Mat;
pub use segment::{SegmentEdgeCache, SegmentEngine, SegmentLikelihoodMatrix, SegmentPrior};
pub use tree::{EdgeWeightMatrix, TreeDistributionSummary};

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
