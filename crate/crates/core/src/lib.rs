//! Anchor link prediction between two heterogeneous social networks.
//!
//! A source user who is not yet on the target network is described by how many
//! of the users similar to them already have target accounts (connector
//! meta-paths) and by how closely those anchored peers are tied to each other
//! inside the target network (recursive meta-paths). Path counts along these
//! meta-paths become features for a linear max-margin classifier.
//!
//! Modules, bottom up:
//! - [`hetgraph`]: typed graph store, ingestion, relation matrices, subsampling
//! - [`anchor`]: anchor correspondence, labelled user sets, target pruning
//! - [`metapath`]: meta-path algebra and the similarity-path catalog
//! - [`count`]: matrix-chain path counting; [`oracle`]: brute-force cross-check
//! - [`features`]: connector/recursive feature tables
//! - [`classifier`]: linear SVM with z-score scaling
//! - [`dataset`]: a network pair plus anchors as one directory
//! - [`eval`]: cross-validation, AUC/accuracy, experiment sweeps
//! - [`config`]: `[section]` / `key = value` configuration files
//! - [`syngen`]: synthetic network pairs with a planted migration signal
//! - [`cli`]: the `crmp` command-line front end

pub mod anchor;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod count;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod hetgraph;
pub mod metapath;
pub mod oracle;
pub mod rng;
pub mod syngen;

pub use error::{Error, Result};
