//! Event persistence and summaries: edge-list snapshot files with a JSON
//! manifest, the synthetic event generator, and descriptive statistics.
//!
//! On-disk layout of an event directory:
//! - `manifest.json`: name, snapshot count, interval, node count, file list.
//! - one edge file per snapshot, plain text, `u<TAB>v<TAB>weight` per line,
//!   ids as non-negative integers, weights written with full round-trip
//!   precision. A line holding a lone node id marks a viewer that is present
//!   but unconnected. `#` starts a comment. Files ending in `.gz` are read
//!   through gzip transparently.

mod synth;

pub use synth::{generate_event, SynthConfig};

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graphcore::{
    edge_evolution, evolution_series, node_evolution, DynamicGraph, EvolutionStats,
    GraphSnapshot, NodeId,
};

pub const EVENT_FORMAT: &str = "dyngcn-event-v1";

/// The JSON document at the root of a saved event directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventManifest {
    pub format: String,
    pub name: String,
    pub snapshot_count: usize,
    pub interval_minutes: f64,
    pub node_count: usize,
    /// Snapshot file names, relative to the manifest's directory, in step order.
    pub snapshots: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn BufRead> = if path.extension().map_or(false, |e| e == "gz") {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    reader
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

fn parse_node(token: &str, path: &Path, line: usize) -> Result<NodeId> {
    token.parse().map_err(|_| Error::Parse {
        file: path.into(),
        line,
        msg: format!("'{token}' is not a node id"),
    })
}

fn parse_snapshot(path: &Path, step: usize, universe: usize) -> Result<GraphSnapshot> {
    let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
    let mut isolated: Vec<NodeId> = Vec::new();
    for (idx, raw) in read_lines(path)?.iter().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.len() {
            1 => isolated.push(parse_node(tokens[0], path, line)?),
            3 => {
                let u = parse_node(tokens[0], path, line)?;
                let v = parse_node(tokens[1], path, line)?;
                let w: f64 = tokens[2].parse().map_err(|_| Error::Parse {
                    file: path.into(),
                    line,
                    msg: format!("'{}' is not an edge weight", tokens[2]),
                })?;
                if !w.is_finite() || w <= 0.0 {
                    return Err(Error::Data(format!(
                        "{}:{line}: edge weight must be positive and finite, got {w}",
                        path.display()
                    )));
                }
                edges.push((u, v, w));
            }
            n => {
                return Err(Error::Parse {
                    file: path.into(),
                    line,
                    msg: format!("expected 'u v weight' or a lone node id, found {n} fields"),
                })
            }
        }
    }
    let active: BTreeSet<NodeId> = edges
        .iter()
        .flat_map(|&(u, v, _)| [u, v])
        .chain(isolated)
        .collect();
    GraphSnapshot::new(step, universe, active, &edges).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads an event from its manifest. Snapshot files parse in parallel.
pub fn load_event(manifest_path: &Path) -> Result<DynamicGraph> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: EventManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: manifest_path.into(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if manifest.format != EVENT_FORMAT {
        return Err(Error::Data(format!(
            "{}: unknown event format '{}', expected '{EVENT_FORMAT}'",
            manifest_path.display(),
            manifest.format
        )));
    }
    if manifest.snapshot_count == 0 {
        return Err(Error::Data(format!(
            "{}: event needs at least one snapshot",
            manifest_path.display()
        )));
    }
    if manifest.snapshot_count != manifest.snapshots.len() {
        return Err(Error::Data(format!(
            "{}: manifest declares {} snapshots but lists {} files",
            manifest_path.display(),
            manifest.snapshot_count,
            manifest.snapshots.len()
        )));
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let parsed = exec::map_indexed(manifest.snapshots.len(), |k| {
        parse_snapshot(&dir.join(&manifest.snapshots[k]), k, manifest.node_count)
    });
    let snapshots = parsed.into_iter().collect::<Result<Vec<_>>>()?;
    DynamicGraph::new(
        &manifest.name,
        manifest.interval_minutes,
        manifest.node_count,
        snapshots,
    )
}

/// Writes one edge file per snapshot plus `manifest.json` into `dir`,
/// creating it if needed. Refuses to replace an existing manifest unless
/// `force` is set. Returns the manifest path.
pub fn save_event(graph: &DynamicGraph, dir: &Path, force: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() && !force {
        return Err(Error::Config(format!(
            "refusing to overwrite existing event at {}; use force to replace it",
            manifest_path.display()
        )));
    }

    let mut files = Vec::with_capacity(graph.len());
    for s in graph.snapshots() {
        let file_name = format!("snapshot_{:03}.tsv", s.step_index());
        let path = dir.join(&file_name);
        let mut out = format!(
            "# event '{}' snapshot {} of {}\n# u\tv\tcapacity\n",
            graph.name(),
            s.step_index(),
            graph.len()
        );
        let mut connected: BTreeSet<NodeId> = BTreeSet::new();
        for &(u, v, w) in s.edges() {
            out.push_str(&format!("{u}\t{v}\t{w}\n"));
            connected.insert(u);
            connected.insert(v);
        }
        for &v in s.active_nodes() {
            if !connected.contains(&v) {
                out.push_str(&format!("{v}\n"));
            }
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        files.push(file_name);
    }

    let manifest = EventManifest {
        format: EVENT_FORMAT.into(),
        name: graph.name().into(),
        snapshot_count: graph.len(),
        interval_minutes: graph.interval_minutes(),
        node_count: graph.node_universe(),
        snapshots: files,
    };
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Data(format!("serializing manifest: {e}")))?;
    fs::write(&manifest_path, body).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Per-snapshot descriptive statistics; evolution columns compare against
/// the previous snapshot and are absent where undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub active_nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub weight_min: Option<f64>,
    pub weight_median: Option<f64>,
    pub weight_mean: Option<f64>,
    pub weight_max: Option<f64>,
    pub edge_evolution: Option<f64>,
    pub node_evolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    pub name: String,
    pub snapshots: usize,
    pub node_universe: usize,
    /// Nodes active in at least one snapshot.
    pub nodes_ever_active: usize,
    pub interval_minutes: f64,
    pub steps: Vec<StepStats>,
    /// Degree counts over the final snapshot's active nodes; index = degree.
    pub final_degree_histogram: Vec<usize>,
    /// Full evolution series, present when K >= 2 and every transition is
    /// defined (no empty snapshots).
    pub evolution: Option<EvolutionStats>,
}

fn weight_summary(s: &GraphSnapshot) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    if s.edge_count() == 0 {
        return (None, None, None, None);
    }
    let mut ws: Vec<f64> = s.edges().iter().map(|e| e.2).collect();
    ws.sort_by(f64::total_cmp);
    let median = if ws.len() % 2 == 1 {
        ws[ws.len() / 2]
    } else {
        0.5 * (ws[ws.len() / 2 - 1] + ws[ws.len() / 2])
    };
    let mean = ws.iter().sum::<f64>() / ws.len() as f64;
    (Some(ws[0]), Some(median), Some(mean), Some(*ws.last().unwrap()))
}

pub fn event_stats(graph: &DynamicGraph) -> EventStats {
    let mut steps = Vec::with_capacity(graph.len());
    let mut ever_active: BTreeSet<NodeId> = BTreeSet::new();
    for (k, s) in graph.snapshots().iter().enumerate() {
        ever_active.extend(s.active_nodes().iter().copied());
        let (w_min, w_median, w_mean, w_max) = weight_summary(s);
        let prev = k.checked_sub(1).map(|p| &graph.snapshots()[p]);
        steps.push(StepStats {
            step: k,
            active_nodes: s.active_count(),
            edges: s.edge_count(),
            max_degree: s.max_degree(),
            mean_degree: if s.active_count() == 0 {
                0.0
            } else {
                2.0 * s.edge_count() as f64 / s.active_count() as f64
            },
            weight_min: w_min,
            weight_median: w_median,
            weight_mean: w_mean,
            weight_max: w_max,
            edge_evolution: prev.and_then(|p| edge_evolution(p, s).ok()),
            node_evolution: prev.and_then(|p| node_evolution(p, s).ok()),
        });
    }

    let last = graph
        .snapshots()
        .last()
        .expect("a dynamic graph always holds at least one snapshot");
    let mut histogram = vec![0usize; last.max_degree() + 1];
    for &v in last.active_nodes() {
        histogram[last.neighborhood(v).len()] += 1;
    }

    EventStats {
        name: graph.name().into(),
        snapshots: graph.len(),
        node_universe: graph.node_universe(),
        nodes_ever_active: ever_active.len(),
        interval_minutes: graph.interval_minutes(),
        steps,
        final_degree_histogram: histogram,
        evolution: if graph.len() >= 2 {
            evolution_series(graph).ok()
        } else {
            None
        },
    }
}

impl EventStats {
    pub fn to_csv(&self) -> String {
        fn opt(x: Option<f64>) -> String {
            x.map(|v| format!("{v:.3}")).unwrap_or_default()
        }
        let mut out = String::from(
            "step,active_nodes,edges,max_degree,mean_degree,weight_min,weight_median,\
             weight_mean,weight_max,edge_evolution,node_evolution\n",
        );
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{:.3},{},{},{},{},{},{}\n",
                s.step,
                s.active_nodes,
                s.edges,
                s.max_degree,
                s.mean_degree,
                opt(s.weight_min),
                opt(s.weight_median),
                opt(s.weight_mean),
                opt(s.weight_max),
                opt(s.edge_evolution),
                opt(s.node_evolution),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("serializing event stats: {e}")))
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &slot in &idx[i..=j] {
            out[slot] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. Undefined for
/// mismatched or too-short inputs and for constant series.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "spearman needs two equal-length series of at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedMetric(
            "spearman is undefined for a constant series".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}
