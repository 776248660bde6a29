//! Edge and node evolution between consecutive snapshots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphcore::{DynamicGraph, GraphSnapshot};

/// Percentage of the current snapshot's edges that were not present in the
/// previous snapshot. Edge identity is the unordered endpoint pair; weight
/// changes do not count as evolution.
pub fn edge_evolution(prev: &GraphSnapshot, curr: &GraphSnapshot) -> Result<f64> {
    if curr.edge_count() == 0 {
        return Err(Error::UndefinedMetric(format!(
            "edge evolution into step {}: current snapshot has no edges",
            curr.step_index()
        )));
    }
    let prev_pairs = prev.edge_pairs();
    let shared = curr
        .edges()
        .iter()
        .filter(|&&(u, v, _)| prev_pairs.contains(&(u, v)))
        .count();
    Ok((1.0 - shared as f64 / curr.edge_count() as f64) * 100.0)
}

/// Same formula on active node sets.
pub fn node_evolution(prev: &GraphSnapshot, curr: &GraphSnapshot) -> Result<f64> {
    if curr.active_count() == 0 {
        return Err(Error::UndefinedMetric(format!(
            "node evolution into step {}: current snapshot has no active nodes",
            curr.step_index()
        )));
    }
    let shared = curr
        .active_nodes()
        .iter()
        .filter(|v| prev.is_active(**v))
        .count();
    Ok((1.0 - shared as f64 / curr.active_count() as f64) * 100.0)
}

/// Per-step evolution series: entry i describes the transition from
/// snapshot i to snapshot i+1, so both vectors have length K−1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub edge: Vec<f64>,
    pub node: Vec<f64>,
}

pub fn evolution_series(dyn_graph: &DynamicGraph) -> Result<EvolutionStats> {
    let snaps = dyn_graph.snapshots();
    let mut edge = Vec::with_capacity(snaps.len().saturating_sub(1));
    let mut node = Vec::with_capacity(snaps.len().saturating_sub(1));
    for pair in snaps.windows(2) {
        edge.push(edge_evolution(&pair[0], &pair[1])?);
        node.push(node_evolution(&pair[0], &pair[1])?);
    }
    Ok(EvolutionStats { edge, node })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn snap(step: usize, edges: &[(usize, usize, f64)]) -> GraphSnapshot {
        let active: BTreeSet<usize> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
        GraphSnapshot::new(step, 8, active, edges).unwrap()
    }

    fn snap_nodes(step: usize, nodes: &[usize]) -> GraphSnapshot {
        GraphSnapshot::new(step, 8, nodes.iter().copied(), &[]).unwrap()
    }

    #[test]
    fn identical_edge_sets_do_not_evolve() {
        let a = snap(0, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let b = snap(1, &[(0, 1, 9.0), (1, 2, 2.0)]);
        assert_eq!(edge_evolution(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_edge_sets_fully_evolve() {
        let a = snap(0, &[(0, 1, 1.0)]);
        let b = snap(1, &[(2, 3, 1.0)]);
        assert_eq!(edge_evolution(&a, &b).unwrap(), 100.0);
    }

    #[test]
    fn half_shared_edges_give_fifty() {
        let a = snap(0, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let b = snap(1, &[(1, 2, 1.0), (2, 3, 1.0)]);
        assert_eq!(edge_evolution(&a, &b).unwrap(), 50.0);
    }

    #[test]
    fn empty_current_edge_set_is_undefined() {
        let a = snap(0, &[(0, 1, 1.0)]);
        let b = snap_nodes(1, &[0, 1]);
        assert!(matches!(
            edge_evolution(&a, &b),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn swapping_arguments_changes_only_the_denominator() {
        let a = snap(0, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let b = snap(1, &[(1, 2, 1.0), (4, 5, 1.0)]);
        let forward = edge_evolution(&a, &b).unwrap();
        let backward = edge_evolution(&b, &a).unwrap();
        assert_eq!(forward, 50.0);
        assert!((backward - (1.0 - 1.0 / 3.0) * 100.0).abs() < 1e-12);
    }

    #[test]
    fn node_evolution_examples() {
        let a = snap_nodes(0, &[1, 2]);
        let b = snap_nodes(1, &[2, 3, 4]);
        let got = node_evolution(&a, &b).unwrap();
        assert!((got - (1.0 - 1.0 / 3.0) * 100.0).abs() < 1e-9);
        assert_eq!(node_evolution(&a, &a).unwrap(), 0.0);
        let empty = snap_nodes(2, &[]);
        assert!(node_evolution(&a, &empty).is_err());
    }

    #[test]
    fn series_walks_consecutive_pairs() {
        let g = DynamicGraph::new(
            "e",
            5.0,
            8,
            vec![
                snap(0, &[(0, 1, 1.0)]),
                snap(1, &[(0, 1, 1.0)]),
                snap(2, &[(2, 3, 1.0)]),
            ],
        )
        .unwrap();
        let stats = evolution_series(&g).unwrap();
        assert_eq!(stats.edge, vec![0.0, 100.0]);
        assert_eq!(stats.node, vec![0.0, 100.0]);
    }
}
