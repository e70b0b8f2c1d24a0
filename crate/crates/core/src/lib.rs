//! Transferable neural-architecture performance prediction over primitive-operator
//! computation graphs.
//!
//! Candidate networks from several cell-based search-space dialects are lowered into
//! a single representation: a DAG whose nodes are primitive operators (convolution,
//! batch norm, activations, pooling, add/concat) annotated with tensor shapes. On top
//! of that representation the crate provides
//!
//! - spectral signatures (smallest normalized-Laplacian eigenvalues) and the
//!   pseudo-distance between them,
//! - a small f64 tensor engine with reverse-mode autodiff and Adam,
//! - a GNN + self-attention graph encoder with projection and prediction heads,
//! - spectrally-weighted contrastive pretraining and the regress/fine-tune pipeline,
//! - an evolutionary search loop driven by a pluggable performance estimator, and
//! - a deterministic synthetic benchmark oracle standing in for tabular NAS data.

pub mod cg;
pub mod encoder;
pub mod error;
pub mod evolution;
pub mod lowering;
pub mod oracle;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
