//! The dynamic embedding model: weight evolution over a window of
//! snapshots, a graph-convolution stack on the newest snapshot, and the
//! capacity-reconstruction loss, with hand-derived reverse-mode gradients.

mod evolve;
mod gcn;
mod loss;
mod state;

pub use evolve::{evolve_attention, evolve_weights};
pub use gcn::gcn_forward;
pub use loss::{loss_with_gradient, reconstruction_loss};
pub use state::{EvolveStep, ModelConfig, ModelState};

use crate::error::{Error, Result};
use crate::graphcore::{normalize_adjacency, DynamicGraph, GraphSnapshot};
use crate::numkit::{Gradients, Matrix, SparseMatrix};

/// Final node representations at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub step_index: usize,
    /// node_universe x d.
    pub z: Matrix,
}

/// Everything a forward pass needs about the data: the evolution window
/// (oldest first, ending at the target step) and the normalized adjacency
/// of the target snapshot. Built once per training run, reused every epoch.
#[derive(Debug, Clone)]
pub struct ForwardContext<'a> {
    step_index: usize,
    window: Vec<&'a GraphSnapshot>,
    target: &'a GraphSnapshot,
    a_hat: SparseMatrix,
}

impl<'a> ForwardContext<'a> {
    /// Window semantics: the evolution runs for min(w, k+1) steps over the
    /// most recent snapshots, ending on snapshot k itself. Steps with fewer
    /// than w predecessors clip the window instead of padding it.
    pub fn new(
        dyn_graph: &'a DynamicGraph,
        k: usize,
        window: usize,
        evolution: bool,
    ) -> Result<ForwardContext<'a>> {
        let target = dyn_graph.snapshot(k)?;
        let a_hat = normalize_adjacency(target.adjacency(), target.active_nodes())?;
        let window = if evolution {
            if window == 0 {
                return Err(Error::Contract("evolution window must be at least 1".into()));
            }
            let n_steps = window.min(k + 1);
            (k + 1 - n_steps..=k)
                .map(|i| dyn_graph.snapshot(i))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(ForwardContext {
            step_index: k,
            window,
            target,
            a_hat,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn target(&self) -> &GraphSnapshot {
        self.target
    }

    pub fn a_hat(&self) -> &SparseMatrix {
        &self.a_hat
    }
}

struct FullCache {
    w_chain: Vec<Matrix>,
    evolve: Vec<evolve::EvolveCache>,
    gcn: gcn::GcnCache,
}

fn forward_cached(ctx: &ForwardContext, state: &ModelState) -> Result<(Matrix, FullCache)> {
    if state.window_steps() != ctx.window.len() {
        return Err(Error::Contract(format!(
            "window of {} snapshots does not match model state with {} evolution steps",
            ctx.window.len(),
            state.window_steps()
        )));
    }
    if state.node_universe() != ctx.target.node_universe() {
        return Err(Error::Contract(format!(
            "model built for universe {}, snapshot has {}",
            state.node_universe(),
            ctx.target.node_universe()
        )));
    }
    let mut w_chain = vec![state.base_weight.clone()];
    let mut evolve_caches = Vec::with_capacity(state.steps.len());
    for (step, snap) in state.steps.iter().zip(&ctx.window) {
        let (next, cache) =
            evolve::evolve_forward(w_chain.last().unwrap(), &step.transform, &step.attention, snap)?;
        w_chain.push(next);
        evolve_caches.push(cache);
    }
    let mut weights: Vec<&Matrix> = vec![w_chain.last().unwrap()];
    weights.extend(state.upper_weights.iter());
    let (z, gcn_cache) = gcn::gcn_forward_cached(&ctx.a_hat, None, &weights)?;
    Ok((
        z,
        FullCache {
            w_chain,
            evolve: evolve_caches,
            gcn: gcn_cache,
        },
    ))
}

/// Full forward pass: evolve the first-layer weights across the window,
/// then run the convolution stack on the target snapshot.
pub fn vstream_forward(ctx: &ForwardContext, state: &ModelState) -> Result<Embedding> {
    if ctx.window.is_empty() || state.window_steps() == 0 {
        return Err(Error::Contract(
            "vstream_forward requires a nonempty evolution window".into(),
        ));
    }
    let (z, _) = forward_cached(ctx, state)?;
    Ok(Embedding {
        step_index: ctx.step_index,
        z,
    })
}

/// Plain GCN on one snapshot, no evolution: the comparison baseline.
pub fn static_gcn_baseline(snapshot: &GraphSnapshot, state: &ModelState) -> Result<Embedding> {
    if state.window_steps() != 0 {
        return Err(Error::Contract(format!(
            "static baseline expects a state without evolution steps, found {}",
            state.window_steps()
        )));
    }
    let a_hat = normalize_adjacency(snapshot.adjacency(), snapshot.active_nodes())?;
    let mut weights: Vec<&Matrix> = vec![&state.base_weight];
    weights.extend(state.upper_weights.iter());
    let z = gcn::gcn_forward(&a_hat, None, &weights)?;
    Ok(Embedding {
        step_index: snapshot.step_index(),
        z,
    })
}

/// Loss at the target snapshot plus gradients for every parameter in the
/// state, keyed by the canonical checkpoint names.
pub fn loss_and_gradients(
    ctx: &ForwardContext,
    state: &ModelState,
) -> Result<(f64, Gradients, Embedding)> {
    let (z, cache) = forward_cached(ctx, state)?;
    let (loss, d_z) = loss::loss_with_gradient(&z, ctx.target)?;

    let mut weights: Vec<&Matrix> = vec![cache.w_chain.last().unwrap()];
    weights.extend(state.upper_weights.iter());
    let layer_grads = gcn::gcn_backward(&ctx.a_hat, &weights, &cache.gcn, &d_z)?;

    let mut grads = Gradients::zeros_like(&state.to_params());
    for (l, g) in layer_grads.iter().enumerate().skip(1) {
        grads.accumulate(&format!("W{}", l + 1), g)?;
    }

    let mut g_w = layer_grads.into_iter().next().unwrap();
    for i in (0..state.steps.len()).rev() {
        let (g_prev, d_h, d_a) = evolve::evolve_backward(
            &cache.w_chain[i],
            &state.steps[i].transform,
            &state.steps[i].attention,
            ctx.window[i],
            &cache.evolve[i],
            &g_w,
        )?;
        grads.accumulate(&format!("H_{i}"), &d_h)?;
        grads.accumulate(&format!("a_{i}"), &d_a)?;
        g_w = g_prev;
    }
    grads.accumulate("W1_base", &g_w)?;
    grads.check_finite()?;

    Ok((
        loss,
        grads,
        Embedding {
            step_index: ctx.step_index,
            z,
        },
    ))
}
