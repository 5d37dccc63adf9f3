//! Reliability-adaptive consistency training for weakly-supervised point
//! cloud segmentation.
//!
//! The crate is organised bottom-up:
//!
//! - [`pointcloud`]: clouds, sparse/dense labels, file formats, k-NN.
//! - [`augment`]: PointWolf, affine, jitter and point-wise mix augmentation.
//! - [`reliability`]: multi-view confidence/uncertainty and the
//!   reliable/ambiguous split.
//! - [`losses`]: segmentation, consistency and mix losses with analytic
//!   gradients w.r.t. logits.
//! - [`segmodel`]: a small per-point network with k-NN max aggregation,
//!   manual backprop and momentum SGD.
//! - [`synthdata`]: procedural indoor scenes and click annotation.
//! - [`trainer`]: the per-step pipeline, evaluation and run orchestration.
//! - [`config`]: the strict run-configuration file.

pub mod augment;
pub mod config;
pub mod error;
pub mod losses;
pub mod pointcloud;
pub mod reliability;
pub mod rng;
pub mod segmodel;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, Result};
