//! Seeded synthetic streaming-event generator.
//!
//! Nodes are viewers grouped into offices (id blocks of `viewers_per_office`
//! consecutive ids). Viewers arrive over time following a front-loaded
//! schedule, attach preferentially inside their own office (gigabit links)
//! and occasionally across offices (roughly a tenth of that), and a decaying
//! fraction of carried edges is rewired at every step. Rewiring picks
//! replacement partners outside the previous snapshot's neighborhood, so a
//! rate of 1 turns over essentially the whole edge set.
//!
//! Capacity is a property of the network path between two viewers, so each
//! pair's weight is drawn once on first contact and reused whenever the
//! overlay reconnects that pair in a later snapshot.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphcore::{DynamicGraph, GraphSnapshot, NodeId};
use crate::numkit::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub name: String,
    pub offices: usize,
    pub viewers_per_office: usize,
    /// Number of snapshots K.
    pub snapshots: usize,
    pub interval_minutes: f64,
    /// Capacity distribution for same-office links, Gbit/s.
    pub intra_weight_mean: f64,
    pub intra_weight_std: f64,
    /// Capacity distribution for cross-office links, Gbit/s.
    pub inter_weight_mean: f64,
    pub inter_weight_std: f64,
    /// Fraction of all viewers arriving at each step; missing entries are 0.
    pub arrival_fractions: Vec<f64>,
    /// Linear-decay rewiring schedule: rate at step 1 and at step K-1.
    pub rewire_start: f64,
    pub rewire_end: f64,
    /// Probability that a rewired endpoint returns to a partner it already
    /// measured, preferring high-capacity ones, instead of probing a new one.
    pub reconnect_probability: f64,
    /// Probability that an attachment attempt targets the own office.
    pub intra_probability: f64,
    /// Connection attempts per arriving viewer.
    pub edges_per_arrival: usize,
    /// Per-node degree cap; 0 means uncapped.
    pub connection_cap: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            name: "synthetic-event".into(),
            offices: 7,
            viewers_per_office: 30,
            snapshots: 12,
            interval_minutes: 5.0,
            intra_weight_mean: 1.0,
            intra_weight_std: 0.15,
            inter_weight_mean: 0.1,
            inter_weight_std: 0.03,
            arrival_fractions: vec![
                0.40, 0.12, 0.10, 0.08, 0.07, 0.06, 0.05, 0.04, 0.03, 0.02, 0.02, 0.01,
            ],
            rewire_start: 0.6,
            rewire_end: 0.07,
            reconnect_probability: 0.6,
            intra_probability: 0.9,
            edges_per_arrival: 3,
            connection_cap: 7,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn node_count(&self) -> usize {
        self.offices * self.viewers_per_office
    }

    pub fn validate(&self) -> Result<()> {
        if self.offices == 0 || self.viewers_per_office == 0 {
            return Err(Error::Config(format!(
                "generator needs at least one office and one viewer per office, got {}x{}",
                self.offices, self.viewers_per_office
            )));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("snapshot count must be at least 1".into()));
        }
        if !(self.interval_minutes.is_finite() && self.interval_minutes > 0.0) {
            return Err(Error::Config(format!(
                "snapshot interval must be positive, got {}",
                self.interval_minutes
            )));
        }
        for (label, mean, std) in [
            ("intra", self.intra_weight_mean, self.intra_weight_std),
            ("inter", self.inter_weight_mean, self.inter_weight_std),
        ] {
            if !(mean.is_finite() && mean > 0.0) || !(std.is_finite() && std >= 0.0) {
                return Err(Error::Config(format!(
                    "{label}-office weight distribution must have positive mean and \
                     non-negative std, got mean {mean}, std {std}"
                )));
            }
        }
        for rate in [self.rewire_start, self.rewire_end] {
            if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
                return Err(Error::Config(format!(
                    "rewiring rates must lie in [0, 1], got {rate}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.intra_probability) {
            return Err(Error::Config(format!(
                "intra-office probability must lie in [0, 1], got {}",
                self.intra_probability
            )));
        }
        if !(0.0..=1.0).contains(&self.reconnect_probability) {
            return Err(Error::Config(format!(
                "reconnect probability must lie in [0, 1], got {}",
                self.reconnect_probability
            )));
        }
        if self.arrival_fractions.len() > self.snapshots {
            return Err(Error::Config(format!(
                "arrival schedule has {} entries but only {} snapshots",
                self.arrival_fractions.len(),
                self.snapshots
            )));
        }
        let mut sum = 0.0;
        for &f in &self.arrival_fractions {
            if !(0.0..=1.0).contains(&f) || !f.is_finite() {
                return Err(Error::Config(format!(
                    "arrival fractions must lie in [0, 1], got {f}"
                )));
            }
            sum += f;
        }
        if sum > 1.0 + 1e-9 {
            return Err(Error::Config(format!(
                "arrival fractions sum to {sum}, more viewers than exist"
            )));
        }
        Ok(())
    }

    fn office_of(&self, v: NodeId) -> usize {
        v / self.viewers_per_office
    }

    /// Rewiring rate applied when forming snapshot k (k >= 1): linear decay
    /// from `rewire_start` at step 1 to `rewire_end` at step K-1.
    pub fn rewire_rate(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k < self.snapshots);
        let span = self.snapshots.saturating_sub(2).max(1) as f64;
        let t = (k - 1) as f64 / span;
        self.rewire_start + (self.rewire_end - self.rewire_start) * t
    }
}

struct GenState<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha20Rng,
    degree: Vec<usize>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
    /// Latent capacity per pair: the bandwidth of the underlying network
    /// path, drawn on first contact and reused whenever the pair reconnects.
    capacity: BTreeMap<(NodeId, NodeId), f64>,
    /// Per-node list of partners with a measured capacity, in first-contact
    /// order; the reconnect path samples from here.
    known: Vec<Vec<(NodeId, f64)>>,
    arrived_by_office: Vec<Vec<NodeId>>,
    arrived_all: Vec<NodeId>,
    is_arrived: Vec<bool>,
}

impl<'a> GenState<'a> {
    fn new(cfg: &'a SynthConfig, rng: ChaCha20Rng) -> GenState<'a> {
        let n = cfg.node_count();
        GenState {
            cfg,
            rng,
            degree: vec![0; n],
            edges: BTreeMap::new(),
            capacity: BTreeMap::new(),
            known: vec![Vec::new(); n],
            arrived_by_office: vec![Vec::new(); cfg.offices],
            arrived_all: Vec::new(),
            is_arrived: vec![false; n],
        }
    }

    fn mark_arrived(&mut self, v: NodeId) {
        self.is_arrived[v] = true;
        self.arrived_by_office[self.cfg.office_of(v)].push(v);
        self.arrived_all.push(v);
    }

    fn at_cap(&self, v: NodeId) -> bool {
        self.cfg.connection_cap != 0 && self.degree[v] >= self.cfg.connection_cap
    }

    fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains_key(&(u.min(v), u.max(v)))
    }

    fn add_edge(&mut self, u: NodeId, v: NodeId, w: f64) {
        let inserted = self.edges.insert((u.min(v), u.max(v)), w).is_none();
        debug_assert!(inserted, "edge ({u},{v}) already present");
        self.degree[u] += 1;
        self.degree[v] += 1;
    }

    fn remove_edge(&mut self, u: NodeId, v: NodeId) {
        let removed = self.edges.remove(&(u.min(v), u.max(v)));
        debug_assert!(removed.is_some(), "edge ({u},{v}) not present");
        self.degree[u] -= 1;
        self.degree[v] -= 1;
    }

    fn feasible(&self, v: NodeId, cand: NodeId, exclude: Option<&BTreeSet<NodeId>>) -> bool {
        cand != v
            && !self.at_cap(cand)
            && !self.has_edge(v, cand)
            && exclude.map_or(true, |set| !set.contains(&cand))
    }

    /// Same-office partner, chosen preferentially by degree + 1.
    fn pick_intra(&mut self, v: NodeId, exclude: Option<&BTreeSet<NodeId>>) -> Option<NodeId> {
        let office = &self.arrived_by_office[self.cfg.office_of(v)];
        let mut total = 0usize;
        let mut candidates: Vec<(NodeId, usize)> = Vec::new();
        for &cand in office {
            if self.feasible(v, cand, exclude) {
                let weight = self.degree[cand] + 1;
                total += weight;
                candidates.push((cand, weight));
            }
        }
        if candidates.is_empty() {
            return None;
        }
        let mut r = self.rng.gen_range(0..total);
        for (cand, weight) in candidates {
            if r < weight {
                return Some(cand);
            }
            r -= weight;
        }
        unreachable!("preferential walk exhausted its own total")
    }

    /// Cross-office partner, uniform over arrived viewers via rejection.
    fn pick_inter(&mut self, v: NodeId, exclude: Option<&BTreeSet<NodeId>>) -> Option<NodeId> {
        if self.arrived_all.len() <= 1 {
            return None;
        }
        for _ in 0..40 {
            let cand = self.arrived_all[self.rng.gen_range(0..self.arrived_all.len())];
            if self.cfg.office_of(cand) != self.cfg.office_of(v)
                && self.feasible(v, cand, exclude)
            {
                return Some(cand);
            }
        }
        None
    }

    fn pick_partner(&mut self, v: NodeId, exclude: Option<&BTreeSet<NodeId>>) -> Option<NodeId> {
        if self.rng.gen_bool(self.cfg.intra_probability) {
            self.pick_intra(v, exclude).or_else(|| self.pick_inter(v, exclude))
        } else {
            self.pick_inter(v, exclude).or_else(|| self.pick_intra(v, exclude))
        }
    }

    /// Latent capacity of the pair (u, v): a positive-truncated normal draw
    /// for the link class, made once per pair and reused on reconnection.
    fn draw_weight(&mut self, u: NodeId, v: NodeId) -> f64 {
        let key = (u.min(v), u.max(v));
        if let Some(&w) = self.capacity.get(&key) {
            return w;
        }
        let intra = self.cfg.office_of(u) == self.cfg.office_of(v);
        let (mean, std) = if intra {
            (self.cfg.intra_weight_mean, self.cfg.intra_weight_std)
        } else {
            (self.cfg.inter_weight_mean, self.cfg.inter_weight_std)
        };
        let mut w = mean;
        if std > 0.0 {
            let normal = Normal::new(mean, std).expect("validated distribution parameters");
            for _ in 0..64 {
                let s = normal.sample(&mut self.rng);
                if s > 0.0 {
                    w = s;
                    break;
                }
            }
        }
        self.capacity.insert(key, w);
        self.known[u].push((v, w));
        self.known[v].push((u, w));
        w
    }

    /// Previously measured partner of v, roulette-weighted by capacity.
    fn pick_known(&mut self, v: NodeId, exclude: Option<&BTreeSet<NodeId>>) -> Option<NodeId> {
        let mut total = 0.0;
        let mut candidates: Vec<(NodeId, f64)> = Vec::new();
        for i in 0..self.known[v].len() {
            let (cand, w) = self.known[v][i];
            if self.feasible(v, cand, exclude) {
                total += w;
                candidates.push((cand, w));
            }
        }
        if candidates.is_empty() {
            return None;
        }
        let mut r = self.rng.gen_range(0.0..total);
        for &(cand, w) in &candidates {
            if r < w {
                return Some(cand);
            }
            r -= w;
        }
        Some(candidates[candidates.len() - 1].0)
    }

    fn attach_new(&mut self, v: NodeId) {
        for _ in 0..self.cfg.edges_per_arrival {
            if self.at_cap(v) {
                break;
            }
            if let Some(p) = self.pick_partner(v, None) {
                let w = self.draw_weight(v, p);
                self.add_edge(v, p, w);
            }
        }
    }

    /// Rewires each carried edge with probability `rate`: one endpoint is
    /// kept and reconnected to a partner outside its previous-snapshot
    /// neighborhood, returning to an already-measured partner with the
    /// configured probability. Infeasible rewires put the original edge back.
    fn rewire(&mut self, rate: f64, prev_neighbors: &[BTreeSet<NodeId>]) {
        if rate == 0.0 {
            return;
        }
        let carried: Vec<(NodeId, NodeId, f64)> = self
            .edges
            .iter()
            .filter(|&(&(u, v), _)| prev_neighbors[u].contains(&v))
            .map(|(&(u, v), &w)| (u, v, w))
            .collect();
        for (u, v, w) in carried {
            if !self.rng.gen_bool(rate) {
                continue;
            }
            self.remove_edge(u, v);
            let keep = if self.rng.gen_bool(0.5) { u } else { v };
            let exclude = Some(&prev_neighbors[keep]);
            let partner = if self.rng.gen_bool(self.cfg.reconnect_probability) {
                self.pick_known(keep, exclude)
                    .or_else(|| self.pick_partner(keep, exclude))
            } else {
                self.pick_partner(keep, exclude)
            };
            match partner {
                Some(p) => {
                    let cap = self.draw_weight(keep, p);
                    self.add_edge(keep, p, cap);
                }
                None => self.add_edge(u, v, w),
            }
        }
    }

    fn neighbor_sets(&self) -> Vec<BTreeSet<NodeId>> {
        let mut sets = vec![BTreeSet::new(); self.degree.len()];
        for &(u, v) in self.edges.keys() {
            sets[u].insert(v);
            sets[v].insert(u);
        }
        sets
    }
}

/// Generates a full event from the config. Pure function of the config:
/// identical configs (including seed) produce bit-identical graphs.
pub fn generate_event(cfg: &SynthConfig) -> Result<DynamicGraph> {
    cfg.validate()?;
    let n = cfg.node_count();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, "synth-event"));

    let mut arrival_order: Vec<NodeId> = (0..n).collect();
    arrival_order.shuffle(&mut rng);

    let mut st = GenState::new(cfg, rng);
    let mut snapshots = Vec::with_capacity(cfg.snapshots);
    let mut prev_neighbors: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    let mut arrived = 0usize;
    let mut cum_fraction = 0.0;

    for k in 0..cfg.snapshots {
        cum_fraction += cfg.arrival_fractions.get(k).copied().unwrap_or(0.0);
        let target = ((cum_fraction * n as f64).round() as usize).min(n).max(arrived);
        let newcomers: Vec<NodeId> = arrival_order[arrived..target].to_vec();
        arrived = target;

        for &v in &newcomers {
            st.mark_arrived(v);
        }
        for &v in &newcomers {
            st.attach_new(v);
        }
        if k > 0 {
            st.rewire(cfg.rewire_rate(k), &prev_neighbors);
        }

        let edges: Vec<(NodeId, NodeId, f64)> =
            st.edges.iter().map(|(&(u, v), &w)| (u, v, w)).collect();
        let active: Vec<NodeId> = (0..n).filter(|&v| st.is_arrived[v]).collect();
        snapshots.push(GraphSnapshot::new(k, n, active, &edges)?);
        prev_neighbors = st.neighbor_sets();
    }

    DynamicGraph::new(&cfg.name, cfg.interval_minutes, n, snapshots)
}
