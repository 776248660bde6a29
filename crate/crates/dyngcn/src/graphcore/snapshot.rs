//! Snapshot and dynamic-graph containers.
//!
//! Node ids are global to an event: a node keeps the same id in every
//! snapshot, and a node absent from a snapshot simply has no incident edges
//! there. All matrices are shaped over the full universe so parameter rows
//! stay addressable across snapshots.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::numkit::SparseMatrix;

pub type NodeId = usize;

/// One weighted, undirected graph snapshot.
///
/// Edges are stored canonically with u < v, weights strictly positive, no
/// self-loops, and both endpoints active. The adjacency matrix is symmetric
/// over the global node universe. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GraphSnapshot {
    step_index: usize,
    node_universe: usize,
    active: BTreeSet<NodeId>,
    edges: Vec<(NodeId, NodeId, f64)>,
    adjacency: SparseMatrix,
}

impl GraphSnapshot {
    pub fn new(
        step_index: usize,
        node_universe: usize,
        active_nodes: impl IntoIterator<Item = NodeId>,
        edges: &[(NodeId, NodeId, f64)],
    ) -> Result<GraphSnapshot> {
        let active: BTreeSet<NodeId> = active_nodes.into_iter().collect();
        if let Some(&bad) = active.iter().find(|&&v| v >= node_universe) {
            return Err(Error::Data(format!(
                "snapshot {step_index}: active node {bad} outside universe of {node_universe}"
            )));
        }

        let mut canon: Vec<(NodeId, NodeId, f64)> = Vec::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u == v {
                return Err(Error::Data(format!(
                    "snapshot {step_index}: self-loop on node {u}"
                )));
            }
            if u >= node_universe || v >= node_universe {
                return Err(Error::Data(format!(
                    "snapshot {step_index}: edge ({u}, {v}) outside universe of {node_universe}"
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Data(format!(
                    "snapshot {step_index}: edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if !active.contains(&a) || !active.contains(&b) {
                return Err(Error::Data(format!(
                    "snapshot {step_index}: edge ({a}, {b}) has an inactive endpoint"
                )));
            }
            canon.push((a, b, w));
        }
        canon.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        canon.dedup_by(|next, prev| {
            (next.0, next.1) == (prev.0, prev.1) && next.2 == prev.2
        });
        for pair in canon.windows(2) {
            if (pair[0].0, pair[0].1) == (pair[1].0, pair[1].1) {
                return Err(Error::Data(format!(
                    "snapshot {step_index}: edge ({}, {}) listed twice with weights {} and {}",
                    pair[0].0, pair[0].1, pair[0].2, pair[1].2
                )));
            }
        }

        let mut trips = Vec::with_capacity(canon.len() * 2);
        for &(u, v, w) in &canon {
            trips.push((u, v, w));
            trips.push((v, u, w));
        }
        let adjacency = SparseMatrix::from_triplets(node_universe, node_universe, &trips)?;

        Ok(GraphSnapshot {
            step_index,
            node_universe,
            active,
            edges: canon,
            adjacency,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn node_universe(&self) -> usize {
        self.node_universe
    }

    pub fn active_nodes(&self) -> &BTreeSet<NodeId> {
        &self.active
    }

    /// n_k, the number of active nodes.
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, v: NodeId) -> bool {
        self.active.contains(&v)
    }

    /// Canonical edges, sorted by (u, v) with u < v.
    pub fn edges(&self) -> &[(NodeId, NodeId, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Unordered endpoint pairs, for set operations.
    pub fn edge_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges.iter().map(|&(u, v, _)| (u, v)).collect()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    /// A_k(u, v); zero when the edge is absent.
    pub fn weight(&self, u: NodeId, v: NodeId) -> f64 {
        if u >= self.node_universe || v >= self.node_universe {
            return 0.0;
        }
        self.adjacency.get(u, v)
    }

    /// Neighbors of v with their weights, sorted by node id. Nodes outside
    /// the universe or without incident edges get an empty list.
    pub fn neighborhood(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        if v >= self.node_universe {
            return Vec::new();
        }
        let (cols, vals) = self.adjacency.row(v);
        cols.iter().copied().zip(vals.iter().copied()).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_universe)
            .map(|v| self.adjacency.row(v).0.len())
            .max()
            .unwrap_or(0)
    }
}

/// Ordered snapshots of one event over a shared node universe.
#[derive(Debug, Clone)]
pub struct DynamicGraph {
    name: String,
    interval_minutes: f64,
    node_universe: usize,
    snapshots: Vec<GraphSnapshot>,
}

impl DynamicGraph {
    pub fn new(
        name: &str,
        interval_minutes: f64,
        node_universe: usize,
        snapshots: Vec<GraphSnapshot>,
    ) -> Result<DynamicGraph> {
        if snapshots.is_empty() {
            return Err(Error::Data(format!("event {name:?} has no snapshots")));
        }
        for (i, s) in snapshots.iter().enumerate() {
            if s.step_index() != i {
                return Err(Error::Data(format!(
                    "event {name:?}: snapshot at position {i} carries step index {}",
                    s.step_index()
                )));
            }
            if s.node_universe() != node_universe {
                return Err(Error::Data(format!(
                    "event {name:?}: snapshot {i} has universe {}, event declares {}",
                    s.node_universe(),
                    node_universe
                )));
            }
        }
        Ok(DynamicGraph {
            name: name.to_string(),
            interval_minutes,
            node_universe,
            snapshots,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval_minutes(&self) -> f64 {
        self.interval_minutes
    }

    pub fn node_universe(&self) -> usize {
        self.node_universe
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshot(&self, k: usize) -> Result<&GraphSnapshot> {
        self.snapshots.get(k).ok_or_else(|| {
            Error::Contract(format!(
                "step {k} out of range, event has {} snapshots",
                self.snapshots.len()
            ))
        })
    }

    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }
}
