//! Representation learning on weighted evolving graphs.
//!
//! The core pipeline trains a two-part model per snapshot of a dynamic
//! graph: the first graph-convolution layer's weights are evolved across a
//! window of recent snapshots by a self-attention recurrence, then a stack
//! of graph convolutions produces node embeddings whose inner products
//! reconstruct edge weights. Evaluation scores those embeddings against
//! edges that appear in later snapshots.
//!
//! Modules, bottom to top:
//! - [`numkit`]: dense/sparse matrices, activations, Glorot init, Adam,
//!   finite-difference gradient checking.
//! - [`graphcore`]: snapshot and dynamic-graph containers, symmetric
//!   normalization, evolution metrics.
//! - [`model`]: the weight-evolution recurrence, GCN forward/backward,
//!   reconstruction loss, checkpointing.
//! - [`train`]: per-snapshot and all-snapshot training loops with traces.
//! - [`eval`]: future-edge test sets, inner-product and MLP scoring heads.
//! - [`dataio`]: event file formats, synthetic event generation, stats.
//!
//! The heavy kernels run data-parallel by default (feature `parallel`) and
//! can be forced sequential at runtime via [`exec::force_sequential`]; both
//! paths produce bit-identical results.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod exec;
pub mod graphcore;
pub mod model;
pub mod numkit;
pub mod train;

pub use error::{Error, Result};
