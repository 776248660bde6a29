//! Graph snapshots, dynamic graphs, adjacency normalization, and the
//! evolution metrics that describe how an event changes over time.

mod metrics;
mod normalize;
mod snapshot;

pub use metrics::{edge_evolution, evolution_series, node_evolution, EvolutionStats};
pub use normalize::normalize_adjacency;
pub use snapshot::{DynamicGraph, GraphSnapshot, NodeId};
