//! Unsupervised fault detection with graph wavelet autoencoders.
//!
//! Signals are cut into windows, consecutive windows become the nodes of a
//! path graph, and a spectral-graph-wavelet autoencoder (GWAE, or its
//! variational form GWVAE) learns to reconstruct healthy node features.
//! Nodes whose reconstruction error exceeds a kernel-density threshold fitted
//! on validation errors are flagged as faulty.

pub mod detection;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod sgwt;
pub mod training;

pub use error::{Error, ErrorCategory, Result};
pub use parallel::Exec;
