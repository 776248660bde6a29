//! Training loops: per-step windowed training with Adam, convergence
//! detection, deterministic seeding, and trace emission.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graphcore::DynamicGraph;
use crate::model::{loss_and_gradients, Embedding, ForwardContext, ModelConfig, ModelState};
use crate::numkit::{adam_step, derive_seed, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Window w used to build the evolution context at each step.
    pub window: usize,
    pub max_epochs: usize,
    /// Relative loss change below which an epoch counts toward convergence.
    pub tolerance: f64,
    /// How many consecutive converged epochs stop the run.
    pub patience: usize,
    pub learning_rate: f64,
    /// Master seed; per-step seeds are derived from it.
    pub seed: u64,
    /// Emit a checkpoint every this many epochs via the observer; 0 = never.
    pub checkpoint_every: usize,
    /// Initialize step k from step k-1's trained parameters instead of
    /// fresh draws (train_all_steps only).
    pub warm_start: bool,
    /// Ablation: update only the evolution transform matrices H_i, keeping
    /// the base weights, attention vectors, and upper layers at their
    /// initialization.
    #[serde(default)]
    pub train_only_h: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 3,
            max_epochs: 500,
            tolerance: 1e-4,
            patience: 10,
            learning_rate: 0.01,
            seed: 0,
            checkpoint_every: 0,
            warm_start: false,
            train_only_h: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Relative loss change stayed within tolerance for `patience` epochs.
    Tolerance,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Tolerance => write!(f, "tolerance"),
            StopReason::MaxEpochs => write!(f, "max-epochs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
    /// Measured wall time per epoch. The CSV writer zeroes this column by
    /// default so that repeated runs produce byte-identical files; pass
    /// `timing = true` to keep the measurements.
    pub wall_ms: Vec<f64>,
    pub final_epoch: usize,
    pub stop: StopReason,
}

impl TrainTrace {
    pub fn initial_loss(&self) -> f64 {
        *self.losses.first().unwrap_or(&f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap_or(&f64::NAN)
    }

    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("epoch,loss,wall_ms\n");
        for (i, loss) in self.losses.iter().enumerate() {
            let ms = if timing { self.wall_ms[i] } else { 0.0 };
            out.push_str(&format!("{},{:.9},{:.3}\n", i + 1, loss, ms));
        }
        out
    }

    pub fn write_csv(&self, path: &Path, timing: bool) -> Result<()> {
        fs::write(path, self.to_csv(timing)).map_err(|e| Error::io(path, e))
    }
}

/// Everything one training run produces. The state, embedding, and last
/// trace entry are mutually consistent: recomputing the loss from the
/// returned state reproduces `trace.final_loss()` exactly.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub embedding: Embedding,
    pub trace: TrainTrace,
}

/// Seed for the model trained at step k, derived from the master seed so
/// steps are independent but reproducible.
pub fn derive_step_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, &format!("step_{k}"))
}

/// Trains the model at step k over the clipped window ending there.
///
/// Per epoch: rebuild the weight chain, forward, loss, Adam update, until
/// the convergence rule or the epoch cap fires. No update is applied on the
/// stopping epoch, so the returned state reproduces the last traced loss.
pub fn train_at_step(
    dyn_graph: &DynamicGraph,
    k: usize,
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
) -> Result<TrainOutcome> {
    train_at_step_with(dyn_graph, k, cfg, mcfg, |_, _, _| Ok(()))
}

/// Same as [`train_at_step`] with an observer called after every epoch
/// (and on the checkpoint cadence) with (epoch, loss, state).
pub fn train_at_step_with(
    dyn_graph: &DynamicGraph,
    k: usize,
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
    mut observer: impl FnMut(usize, f64, &ModelState) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    mcfg.validate()?;
    let ctx = ForwardContext::new(dyn_graph, k, cfg.window, mcfg.evolution)?;
    let state = ModelState::init(
        dyn_graph.node_universe(),
        &mcfg.layer_dims,
        ctx.window_len(),
        derive_step_seed(cfg.seed, k),
    )?;
    train_in_context(&ctx, state, cfg, &mut observer)
}

fn train_in_context(
    ctx: &ForwardContext,
    mut state: ModelState,
    cfg: &TrainConfig,
    observer: &mut impl FnMut(usize, f64, &ModelState) -> Result<()>,
) -> Result<TrainOutcome> {
    let mut params = state.to_params();
    let mut adam = AdamState::new(&params);
    let acfg = AdamConfig::with_lr(cfg.learning_rate);
    acfg.validate()?;

    let mut losses: Vec<f64> = Vec::new();
    let mut wall_ms: Vec<f64> = Vec::new();
    let mut streak = 0usize;
    let mut stop = StopReason::MaxEpochs;
    let mut embedding = None;

    for epoch in 1..=cfg.max_epochs {
        let t0 = Instant::now();
        state.load_params(&params)?;
        let (loss, grads, emb) = loss_and_gradients(ctx, &state).map_err(|e| match e {
            Error::Numeric { msg, .. } => Error::numeric_at(msg, epoch),
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(Error::numeric_at(format!("loss became {loss}"), epoch));
        }

        let rel_change = match losses.last() {
            Some(&prev) => (loss - prev).abs() / prev.abs().max(1e-30),
            None => f64::INFINITY,
        };
        losses.push(loss);
        embedding = Some(emb);

        if rel_change <= cfg.tolerance {
            streak += 1;
        } else {
            streak = 0;
        }
        let converged = streak >= cfg.patience;
        let last = converged || epoch == cfg.max_epochs;
        if !last {
            let mut grads = grads;
            if cfg.train_only_h {
                freeze_all_but_transforms(&mut grads);
            }
            adam_step(&mut params, &grads, &mut adam, &acfg)
                .map_err(|e| annotate_epoch(e, epoch))?;
        }
        wall_ms.push(t0.elapsed().as_secs_f64() * 1000.0);

        observer(epoch, loss, &state)?;
        if converged {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let final_epoch = losses.len();
    Ok(TrainOutcome {
        state,
        embedding: embedding.unwrap(),
        trace: TrainTrace {
            losses,
            wall_ms,
            final_epoch,
            stop,
        },
    })
}

fn annotate_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric { msg, .. } => Error::numeric_at(msg, epoch),
        other => other,
    }
}

/// Zeroes every gradient except those of the H_i transforms, so Adam leaves
/// all other parameters untouched.
fn freeze_all_but_transforms(grads: &mut crate::numkit::Gradients) {
    for (name, g) in grads.iter_mut() {
        if !name.starts_with("H_") {
            g.data_mut().fill(0.0);
        }
    }
}

/// Trains the static baseline (no evolution) at step k with the same loop.
pub fn train_static_at_step(
    dyn_graph: &DynamicGraph,
    k: usize,
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
) -> Result<TrainOutcome> {
    let static_cfg = ModelConfig {
        evolution: false,
        ..mcfg.clone()
    };
    train_at_step(dyn_graph, k, cfg, &static_cfg)
}

/// Trains every step of the event. Fresh initialization per step runs the
/// steps in parallel; warm starting chains them sequentially, seeding each
/// step's matching parameters from the previous trained state.
pub fn train_all_steps(
    dyn_graph: &DynamicGraph,
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    mcfg.validate()?;
    let steps = dyn_graph.len();
    if !cfg.warm_start {
        let results = exec::map_indexed(steps, |k| train_at_step(dyn_graph, k, cfg, mcfg));
        return results.into_iter().collect();
    }

    let mut out: Vec<TrainOutcome> = Vec::with_capacity(steps);
    for k in 0..steps {
        let ctx = ForwardContext::new(dyn_graph, k, cfg.window, mcfg.evolution)?;
        let mut state = ModelState::init(
            dyn_graph.node_universe(),
            &mcfg.layer_dims,
            ctx.window_len(),
            derive_step_seed(cfg.seed, k),
        )?;
        if let Some(prev) = out.last() {
            carry_matching_params(&mut state, &prev.state);
        }
        out.push(train_in_context(&ctx, state, cfg, &mut |_, _, _| Ok(()))?);
    }
    Ok(out)
}

/// Copies every parameter whose name and shape both states share.
fn carry_matching_params(dst: &mut ModelState, src: &ModelState) {
    let src_params = src.to_params();
    let mut dst_params = dst.to_params();
    for (name, m) in dst_params.iter_mut() {
        if let Some(prev) = src_params.get(name) {
            if prev.shape() == m.shape() {
                m.data_mut().copy_from_slice(prev.data());
            }
        }
    }
    dst.load_params(&dst_params).unwrap();
}

/// True when the `window`-point moving average of `losses` is non-increasing
/// over the final half of the run, allowing transient upticks up to `slack`
/// (relative) between consecutive smoothed points.
pub fn smoothed_non_increasing(losses: &[f64], window: usize, slack: f64) -> bool {
    if losses.len() < window + 1 {
        return true;
    }
    let smoothed: Vec<f64> = losses
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    let start = smoothed.len() / 2;
    smoothed[start..]
        .windows(2)
        .all(|p| p[1] <= p[0] * (1.0 + slack))
}
