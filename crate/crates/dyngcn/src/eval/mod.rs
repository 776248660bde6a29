//! Link-capacity prediction protocol: future-edge test sets, prediction
//! heads, and MAE/RMSE scoring.
//!
//! A test set at step k holds the unordered node pairs that carry no edge in
//! snapshot k but do in at least one later snapshot; the task is to predict
//! their weights from the step-k embeddings alone.

mod mlp;

pub use mlp::{predict_mlp, train_mlp_head, MlpHead};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graphcore::{DynamicGraph, NodeId};
use crate::model::Embedding;
use crate::numkit::relu;

/// How to pick the true weight for a future edge that appears in several
/// later snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FutureWeight {
    /// Weight from the earliest snapshot where the edge appears.
    #[default]
    Earliest,
    /// Mean weight over all snapshots where the edge appears.
    Mean,
}

impl fmt::Display for FutureWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FutureWeight::Earliest => write!(f, "earliest"),
            FutureWeight::Mean => write!(f, "mean"),
        }
    }
}

impl FromStr for FutureWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "earliest" => Ok(FutureWeight::Earliest),
            "mean" => Ok(FutureWeight::Mean),
            other => Err(Error::Config(format!(
                "unknown future-weight mode '{other}', expected earliest|mean"
            ))),
        }
    }
}

/// Unobserved future edges for one evaluation step.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    step_index: usize,
    pairs: Vec<(NodeId, NodeId, f64)>,
}

impl TestSet {
    /// Builds a test set from explicit pairs. Pairs are canonicalized to
    /// u < v and sorted; exact duplicates collapse, conflicting duplicates
    /// and self-loops are rejected.
    pub fn from_pairs(step_index: usize, pairs: &[(NodeId, NodeId, f64)]) -> Result<TestSet> {
        let mut canon: Vec<(NodeId, NodeId, f64)> = Vec::with_capacity(pairs.len());
        for &(u, v, w) in pairs {
            if u == v {
                return Err(Error::Data(format!("test pair ({u},{v}) is a self-loop")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Data(format!(
                    "test pair ({u},{v}) has invalid weight {w}"
                )));
            }
            canon.push((u.min(v), u.max(v), w));
        }
        canon.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        canon.dedup();
        for win in canon.windows(2) {
            if win[0].0 == win[1].0 && win[0].1 == win[1].1 {
                return Err(Error::Data(format!(
                    "test pair ({}, {}) listed twice with different weights",
                    win[0].0, win[0].1
                )));
            }
        }
        if canon.is_empty() {
            return Err(Error::EmptyTestSet(format!(
                "no pairs supplied for step {step_index}"
            )));
        }
        Ok(TestSet {
            step_index,
            pairs: canon,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Pairs as (u, v, true_weight), u < v, sorted ascending.
    pub fn pairs(&self) -> &[(NodeId, NodeId, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Collects every unordered pair that is absent from snapshot k but carries
/// an edge in some snapshot k+1..K-1, with its true weight chosen per
/// `future`. Pair order is deterministic (sorted ascending).
pub fn build_test_set(graph: &DynamicGraph, k: usize, future: FutureWeight) -> Result<TestSet> {
    let total = graph.len();
    let current = graph.snapshot(k)?.edge_pairs();
    if k + 1 >= total {
        return Err(Error::EmptyTestSet(format!(
            "step {k} is the final snapshot of '{}', no future edges exist",
            graph.name()
        )));
    }

    // (first_weight, weight_sum, appearance_count) per unordered pair.
    let mut future_edges: BTreeMap<(NodeId, NodeId), (f64, f64, usize)> = BTreeMap::new();
    for j in (k + 1)..total {
        for &(u, v, w) in graph.snapshot(j)?.edges() {
            if current.contains(&(u, v)) {
                continue;
            }
            future_edges
                .entry((u, v))
                .and_modify(|e| {
                    e.1 += w;
                    e.2 += 1;
                })
                .or_insert((w, w, 1));
        }
    }
    if future_edges.is_empty() {
        return Err(Error::EmptyTestSet(format!(
            "no edges appear after step {k} of '{}' beyond those already observed",
            graph.name()
        )));
    }

    let pairs = future_edges
        .into_iter()
        .map(|((u, v), (first, sum, count))| {
            let w = match future {
                FutureWeight::Earliest => first,
                FutureWeight::Mean => sum / count as f64,
            };
            (u, v, w)
        })
        .collect();
    Ok(TestSet {
        step_index: k,
        pairs,
    })
}

/// Inner-product weight prediction, clipped at zero to match the prediction
/// function inside the reconstruction loss. Callers must pass node ids below
/// the embedding's row count.
pub fn predict_inner(z: &Embedding, u: NodeId, v: NodeId) -> f64 {
    let dot = z
        .z
        .row(u)
        .iter()
        .zip(z.z.row(v))
        .map(|(a, b)| a * b)
        .sum::<f64>();
    relu(dot)
}

/// MAE and RMSE of `predict` over the test set. Predictions run in parallel;
/// the two sums accumulate in pair order, so results are bit-identical
/// between execution modes.
pub fn score<F>(test: &TestSet, predict: F) -> Result<(f64, f64)>
where
    F: Fn(NodeId, NodeId) -> Result<f64> + Sync + Send,
{
    if test.pairs.is_empty() {
        return Err(Error::EmptyTestSet(format!(
            "nothing to score at step {}",
            test.step_index
        )));
    }
    let residuals = exec::map_indexed(test.pairs.len(), |i| {
        let (u, v, w) = test.pairs[i];
        predict(u, v).map(|p| p - w)
    });
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for r in residuals {
        let r = r?;
        abs_sum += r.abs();
        sq_sum += r * r;
    }
    let m = test.pairs.len() as f64;
    Ok((abs_sum / m, (sq_sum / m).sqrt()))
}

/// Which prediction head produced a report's numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    #[default]
    Inner,
    Mlp,
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadKind::Inner => write!(f, "inner"),
            HeadKind::Mlp => write!(f, "mlp"),
        }
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(HeadKind::Inner),
            "mlp" => Ok(HeadKind::Mlp),
            other => Err(Error::Config(format!(
                "unknown head '{other}', expected inner|mlp"
            ))),
        }
    }
}

/// One scored evaluation step. `step` is the row's position in the report,
/// `k` the snapshot index the embeddings were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: usize,
    pub k: usize,
    pub count: usize,
    pub mae: f64,
    pub rmse: f64,
    pub head: HeadKind,
}

/// Evaluation results across one or more steps, tagged with the
/// configuration fingerprint of the run that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(fingerprint: impl Into<String>) -> EvalReport {
        EvalReport {
            fingerprint: fingerprint.into(),
            rows: Vec::new(),
        }
    }

    /// Appends one scored step, enforcing that both errors are finite,
    /// non-negative, and ordered MAE <= RMSE (up to roundoff).
    pub fn push(&mut self, k: usize, count: usize, mae: f64, rmse: f64, head: HeadKind) -> Result<()> {
        if !mae.is_finite() || !rmse.is_finite() || mae < 0.0 || rmse < 0.0 {
            return Err(Error::numeric(format!(
                "eval scores at step {k} are not finite non-negative: MAE {mae}, RMSE {rmse}"
            )));
        }
        if mae > rmse * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Contract(format!(
                "MAE {mae} exceeds RMSE {rmse} at step {k}"
            )));
        }
        self.rows.push(EvalRow {
            step: self.rows.len(),
            k,
            count,
            mae,
            rmse,
            head,
        });
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,k,|O_k|,MAE,RMSE,head\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.9},{:.9},{}\n",
                r.step, r.k, r.count, r.mae, r.rmse, r.head
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("serializing eval report: {e}")))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body = self.to_json()?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcore::GraphSnapshot;
    use crate::model::reconstruction_loss;
    use crate::numkit::{glorot_init, Matrix};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn snap(step: usize, universe: usize, edges: &[(usize, usize, f64)]) -> GraphSnapshot {
        GraphSnapshot::new(step, universe, 0..universe, edges).unwrap()
    }

    fn event(name: &str, universe: usize, per_step: &[&[(usize, usize, f64)]]) -> DynamicGraph {
        let snapshots = per_step
            .iter()
            .enumerate()
            .map(|(k, edges)| snap(k, universe, edges))
            .collect();
        DynamicGraph::new(name, 10.0, universe, snapshots).unwrap()
    }

    fn embedding(z: Matrix) -> Embedding {
        Embedding { step_index: 0, z }
    }

    #[test]
    fn new_future_edge_is_the_test_set() {
        let g = event(
            "t",
            3,
            &[&[(0, 1, 5.0)], &[(0, 1, 5.0), (1, 2, 7.0)]],
        );
        let t = build_test_set(&g, 0, FutureWeight::Earliest).unwrap();
        assert_eq!(t.pairs(), &[(1, 2, 7.0)]);
        assert_eq!(t.step_index(), 0);
    }

    #[test]
    fn edge_present_now_is_excluded_even_if_it_reappears() {
        let g = event(
            "t",
            3,
            &[&[(0, 1, 5.0)], &[(1, 2, 7.0)], &[(0, 1, 5.0), (1, 2, 7.0)]],
        );
        let t = build_test_set(&g, 0, FutureWeight::Earliest).unwrap();
        assert_eq!(t.pairs(), &[(1, 2, 7.0)]);
    }

    #[test]
    fn final_step_has_no_test_set() {
        let g = event("t", 3, &[&[(0, 1, 5.0)], &[(0, 1, 5.0)]]);
        match build_test_set(&g, 1, FutureWeight::Earliest) {
            Err(Error::EmptyTestSet(_)) => {}
            other => panic!("expected empty-test-set error, got {other:?}"),
        }
    }

    #[test]
    fn no_new_future_edges_is_an_empty_test_set() {
        let g = event("t", 3, &[&[(0, 1, 5.0)], &[(0, 1, 5.0)]]);
        match build_test_set(&g, 0, FutureWeight::Earliest) {
            Err(Error::EmptyTestSet(_)) => {}
            other => panic!("expected empty-test-set error, got {other:?}"),
        }
    }

    #[test]
    fn earliest_and_mean_weights_differ_as_specified() {
        let g = event(
            "t",
            4,
            &[&[(0, 1, 5.0)], &[(2, 3, 2.0)], &[(2, 3, 4.0)]],
        );
        let earliest = build_test_set(&g, 0, FutureWeight::Earliest).unwrap();
        assert_eq!(earliest.pairs(), &[(2, 3, 2.0)]);
        let mean = build_test_set(&g, 0, FutureWeight::Mean).unwrap();
        assert_eq!(mean.pairs(), &[(2, 3, 3.0)]);
    }

    #[test]
    fn pairs_come_out_sorted_and_deduplicated() {
        let g = event(
            "t",
            5,
            &[
                &[(0, 1, 5.0)],
                &[(3, 4, 9.0), (0, 2, 1.0)],
                &[(0, 2, 1.0), (1, 2, 6.0)],
            ],
        );
        let t = build_test_set(&g, 0, FutureWeight::Earliest).unwrap();
        assert_eq!(
            t.pairs(),
            &[(0, 2, 1.0), (1, 2, 6.0), (3, 4, 9.0)]
        );
    }

    #[test]
    fn from_pairs_canonicalizes_and_validates() {
        let t = TestSet::from_pairs(2, &[(3, 1, 4.0), (1, 3, 4.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(t.pairs(), &[(0, 2, 1.0), (1, 3, 4.0)]);
        assert!(TestSet::from_pairs(0, &[(1, 1, 2.0)]).is_err());
        assert!(TestSet::from_pairs(0, &[(0, 1, -2.0)]).is_err());
        assert!(TestSet::from_pairs(0, &[(0, 1, 2.0), (1, 0, 3.0)]).is_err());
        assert!(matches!(
            TestSet::from_pairs(0, &[]),
            Err(Error::EmptyTestSet(_))
        ));
    }

    #[test]
    fn inner_product_prediction_matches_hand_values() {
        let mut z = Matrix::zeros(3, 2);
        z.row_mut(1).copy_from_slice(&[1.0, 2.0]);
        z.row_mut(2).copy_from_slice(&[3.0, -1.0]);
        let e = embedding(z);
        assert_eq!(predict_inner(&e, 0, 0), 0.0);
        assert_eq!(predict_inner(&e, 1, 2), 1.0);

        let mut z = Matrix::zeros(2, 1);
        z.set(0, 0, -1.0);
        z.set(1, 0, 1.0);
        let e = embedding(z);
        assert_eq!(predict_inner(&e, 0, 1), 0.0);
    }

    #[test]
    fn perfect_predictor_scores_zero() {
        let t = TestSet::from_pairs(0, &[(0, 1, 3.0), (1, 2, 8.0)]).unwrap();
        let (mae, rmse) = score(&t, |u, v| {
            Ok(t.pairs().iter().find(|p| (p.0, p.1) == (u, v)).unwrap().2)
        })
        .unwrap();
        assert_eq!(mae, 0.0);
        assert_eq!(rmse, 0.0);
    }

    #[test]
    fn constant_offset_gives_equal_mae_and_rmse() {
        let t = TestSet::from_pairs(0, &[(0, 1, 3.0), (1, 2, 8.0), (0, 3, 1.0)]).unwrap();
        let delta = 2.5;
        let (mae, rmse) = score(&t, |u, v| {
            Ok(t.pairs().iter().find(|p| (p.0, p.1) == (u, v)).unwrap().2 + delta)
        })
        .unwrap();
        assert!((mae - delta).abs() < 1e-12);
        assert!((rmse - delta).abs() < 1e-12);
    }

    #[test]
    fn residuals_zero_and_two_give_known_scores() {
        let t = TestSet::from_pairs(0, &[(0, 1, 3.0), (1, 2, 8.0)]).unwrap();
        let (mae, rmse) = score(&t, |u, _| Ok(if u == 0 { 3.0 } else { 10.0 })).unwrap();
        assert!((mae - 1.0).abs() < 1e-15);
        assert!((rmse - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scoring_empty_set_errors() {
        let t = TestSet {
            step_index: 0,
            pairs: Vec::new(),
        };
        assert!(matches!(
            score(&t, |_, _| Ok(0.0)),
            Err(Error::EmptyTestSet(_))
        ));
    }

    #[test]
    fn predictor_errors_propagate() {
        let t = TestSet::from_pairs(0, &[(0, 1, 3.0)]).unwrap();
        let res = score(&t, |_, _| Err(Error::Contract("boom".into())) as Result<f64>);
        assert!(matches!(res, Err(Error::Contract(_))));
    }

    #[test]
    fn inner_score_on_training_edges_matches_reconstruction_loss() {
        let s = snap(0, 6, &[(0, 1, 4.0), (1, 2, 9.0), (2, 5, 2.0), (3, 4, 7.0)]);
        let z = embedding(glorot_init(6, 3, 42).unwrap());
        let loss = reconstruction_loss(&z.z, &s).unwrap();

        let t = TestSet::from_pairs(0, s.edges()).unwrap();
        let (_, rmse) = score(&t, |u, v| Ok(predict_inner(&z, u, v))).unwrap();

        let n_k = s.active_count() as f64;
        let m = s.edge_count() as f64;
        let lhs = n_k * loss * loss;
        let rhs = 2.0 * m * rmse * rmse;
        assert!(
            (lhs - rhs).abs() <= 1e-9 * lhs.max(rhs).max(1.0),
            "n_k*loss^2 = {lhs}, 2m*RMSE^2 = {rhs}"
        );
    }

    #[test]
    fn report_enforces_score_ordering_and_formats_csv() {
        let mut report = EvalReport::new("fp-abc");
        report.push(10, 37, 12.5, 15.25, HeadKind::Inner).unwrap();
        report.push(11, 4, 3.0, 3.0, HeadKind::Mlp).unwrap();
        assert!(report.push(12, 1, 5.0, 4.0, HeadKind::Inner).is_err());
        assert!(report.push(12, 1, f64::NAN, 1.0, HeadKind::Inner).is_err());

        let csv = report.to_csv();
        assert_eq!(
            csv,
            "step,k,|O_k|,MAE,RMSE,head\n\
             0,10,37,12.500000000,15.250000000,inner\n\
             1,11,4,3.000000000,3.000000000,mlp\n"
        );

        let json = report.to_json().unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn head_kind_parses_and_displays() {
        assert_eq!("inner".parse::<HeadKind>().unwrap(), HeadKind::Inner);
        assert_eq!("mlp".parse::<HeadKind>().unwrap(), HeadKind::Mlp);
        assert!("dot".parse::<HeadKind>().is_err());
        assert_eq!(HeadKind::Inner.to_string(), "inner");
        assert_eq!(FutureWeight::Mean.to_string(), "mean");
        assert_eq!(
            "earliest".parse::<FutureWeight>().unwrap(),
            FutureWeight::Earliest
        );
        assert!("median".parse::<FutureWeight>().is_err());
    }

    fn pair_universe() -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for u in 0..6 {
            for v in (u + 1)..6 {
                pairs.push((u, v));
            }
        }
        pairs
    }

    proptest! {
        /// Later test sets only shrink: any pair of O_{k'} that first
        /// appears after k' must also be in O_k for every k < k'.
        #[test]
        fn future_sets_shrink_monotonically(
            steps in prop::collection::vec(
                prop::collection::btree_set(0usize..15, 0..10), 4)
        ) {
            let all = pair_universe();
            let per_step: Vec<Vec<(usize, usize, f64)>> = steps
                .iter()
                .map(|ids| {
                    ids.iter()
                        .map(|&i| (all[i].0, all[i].1, 1.0 + i as f64))
                        .collect()
                })
                .collect();
            let snapshots: Vec<GraphSnapshot> = per_step
                .iter()
                .enumerate()
                .map(|(k, edges)| snap(k, 6, edges))
                .collect();
            let g = DynamicGraph::new("prop", 10.0, 6, snapshots).unwrap();

            let first_appearance = |u: usize, v: usize| -> usize {
                per_step
                    .iter()
                    .position(|edges| edges.iter().any(|&(a, b, _)| (a, b) == (u, v)))
                    .unwrap()
            };

            for k in 0..3 {
                for k2 in (k + 1)..3 {
                    let (Ok(t_k), Ok(t_k2)) = (
                        build_test_set(&g, k, FutureWeight::Earliest),
                        build_test_set(&g, k2, FutureWeight::Earliest),
                    ) else {
                        continue;
                    };
                    let early: BTreeSet<(usize, usize)> =
                        t_k.pairs().iter().map(|&(u, v, _)| (u, v)).collect();
                    for &(u, v, _) in t_k2.pairs() {
                        if first_appearance(u, v) > k2 {
                            prop_assert!(
                                early.contains(&(u, v)),
                                "pair ({u},{v}) in O_{k2} but missing from O_{k}"
                            );
                        }
                    }
                }
            }
        }

        /// Scoring is order-invariant and always satisfies MAE <= RMSE.
        #[test]
        fn scores_are_order_invariant_and_ordered(
            weights in prop::collection::vec(0.1f64..100.0, 1..12),
            preds in prop::collection::vec(0.0f64..100.0, 12)
        ) {
            let all = pair_universe();
            let pairs: Vec<(usize, usize, f64)> = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (all[i].0, all[i].1, w))
                .collect();
            let t = TestSet::from_pairs(0, &pairs).unwrap();

            let mut reversed = pairs.clone();
            reversed.reverse();
            let t_rev = TestSet::from_pairs(0, &reversed).unwrap();

            let lookup = |u: usize, v: usize| {
                let idx = all.iter().position(|&p| p == (u, v)).unwrap();
                Ok(preds[idx])
            };
            let (mae_a, rmse_a) = score(&t, lookup).unwrap();
            let (mae_b, rmse_b) = score(&t_rev, lookup).unwrap();
            prop_assert!((mae_a - mae_b).abs() <= 1e-12 * mae_a.abs().max(1.0));
            prop_assert!((rmse_a - rmse_b).abs() <= 1e-12 * rmse_a.abs().max(1.0));
            prop_assert!(mae_a <= rmse_a * (1.0 + 1e-12) + 1e-300);
        }
    }
}
