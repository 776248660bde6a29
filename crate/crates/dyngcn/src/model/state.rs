//! Model configuration, trainable state, and checkpointing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numkit::{derive_seed, glorot_init, Matrix, ParamSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Window w: how many past snapshots feed the weight evolution.
    pub window: usize,
    /// Layer output sizes [d1, ..., dL]; the last entry is the embedding
    /// dimension.
    pub layer_dims: Vec<usize>,
    /// Master seed for parameter initialization.
    pub seed: u64,
    /// When false the evolution stages are skipped entirely and the first
    /// layer uses the base weight as-is (the static baseline).
    pub evolution: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window: 3,
            layer_dims: vec![32, 16],
            seed: 0,
            evolution: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.layer_dims.is_empty() {
            return Err(Error::Config("layer_dims must not be empty".into()));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "layer_dims entries must be positive, got {:?}",
                self.layer_dims
            )));
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }
}

/// One weight-evolution stage: the shared linear transform applied to every
/// weight row and the attention vector that scores neighbor pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveStep {
    /// d1 x d1.
    pub transform: Matrix,
    /// 1 x 2*d1, split as [left half | right half] over the concatenated
    /// transformed rows of the two endpoints.
    pub attention: Matrix,
}

/// All trainable parameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    node_universe: usize,
    layer_dims: Vec<usize>,
    /// node_universe x d1 seed weight at the start of the window.
    pub base_weight: Matrix,
    /// One evolution stage per window step, oldest first; empty when the
    /// model runs as a static GCN.
    pub steps: Vec<EvolveStep>,
    /// W2..WL, each layer_dims[l-1] x layer_dims[l].
    pub upper_weights: Vec<Matrix>,
}

impl ModelState {
    /// Glorot-initializes every parameter. Each parameter draws from its own
    /// stream keyed by (seed, name), so states with different step counts
    /// still agree on their shared parameters.
    pub fn init(
        node_universe: usize,
        layer_dims: &[usize],
        n_steps: usize,
        seed: u64,
    ) -> Result<ModelState> {
        if node_universe == 0 {
            return Err(Error::Config("node universe must be positive".into()));
        }
        if layer_dims.is_empty() || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "invalid layer dims {layer_dims:?}"
            )));
        }
        let d1 = layer_dims[0];
        let base_weight = glorot_init(node_universe, d1, derive_seed(seed, "W1_base"))?;
        let mut steps = Vec::with_capacity(n_steps);
        for i in 0..n_steps {
            steps.push(EvolveStep {
                transform: glorot_init(d1, d1, derive_seed(seed, &format!("H_{i}")))?,
                attention: glorot_init(1, 2 * d1, derive_seed(seed, &format!("a_{i}")))?,
            });
        }
        let mut upper_weights = Vec::with_capacity(layer_dims.len().saturating_sub(1));
        for l in 1..layer_dims.len() {
            upper_weights.push(glorot_init(
                layer_dims[l - 1],
                layer_dims[l],
                derive_seed(seed, &format!("W{}", l + 1)),
            )?);
        }
        Ok(ModelState {
            node_universe,
            layer_dims: layer_dims.to_vec(),
            base_weight,
            steps,
            upper_weights,
        })
    }

    pub fn node_universe(&self) -> usize {
        self.node_universe
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn window_steps(&self) -> usize {
        self.steps.len()
    }

    /// Canonical parameter names in checkpoint order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["W1_base".to_string()];
        names.extend((0..self.steps.len()).map(|i| format!("H_{i}")));
        names.extend((0..self.steps.len()).map(|i| format!("a_{i}")));
        names.extend((1..self.layer_dims.len()).map(|l| format!("W{}", l + 1)));
        names
    }

    /// Exports every parameter, in canonical order, for the optimizer.
    pub fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("W1_base", self.base_weight.clone()).unwrap();
        for (i, s) in self.steps.iter().enumerate() {
            p.insert(&format!("H_{i}"), s.transform.clone()).unwrap();
        }
        for (i, s) in self.steps.iter().enumerate() {
            p.insert(&format!("a_{i}"), s.attention.clone()).unwrap();
        }
        for (l, w) in self.upper_weights.iter().enumerate() {
            p.insert(&format!("W{}", l + 2), w.clone()).unwrap();
        }
        p
    }

    /// Copies parameter values back from the optimizer's set. Names and
    /// shapes must match this state exactly.
    pub fn load_params(&mut self, params: &ParamSet) -> Result<()> {
        let expected = self.param_names();
        if params.names() != expected {
            return Err(Error::Contract(format!(
                "parameter names {:?} do not match model structure {:?}",
                params.names(),
                expected
            )));
        }
        let fetch = |name: &str, slot: &mut Matrix| -> Result<()> {
            let src = params.get(name).unwrap();
            if src.shape() != slot.shape() {
                return Err(Error::Dimension {
                    op: format!("load_params({name})"),
                    lhs: slot.shape(),
                    rhs: src.shape(),
                });
            }
            slot.data_mut().copy_from_slice(src.data());
            Ok(())
        };
        fetch("W1_base", &mut self.base_weight)?;
        for i in 0..self.steps.len() {
            fetch(&format!("H_{i}"), &mut self.steps[i].transform)?;
            fetch(&format!("a_{i}"), &mut self.steps[i].attention)?;
        }
        for l in 0..self.upper_weights.len() {
            fetch(&format!("W{}", l + 2), &mut self.upper_weights[l])?;
        }
        Ok(())
    }

    /// Hash of the structural shape (not the values): universe, dims, and
    /// window step count. Reports embed it so a checkpoint is never scored
    /// under a different configuration.
    pub fn structural_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "universe={};dims={:?};steps={}",
            self.node_universe, self.layer_dims, self.steps.len()
        ));
        hex(&h.finalize())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            node_universe: self.node_universe,
            layer_dims: self.layer_dims.clone(),
            window_steps: self.steps.len(),
            params: self
                .to_params()
                .iter()
                .map(|(name, m)| NamedParam {
                    name: name.to_string(),
                    rows: m.rows(),
                    cols: m.cols(),
                    values: m.data().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| Error::Data(format!("checkpoint serialization failed: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CheckpointFile = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            line: 0,
            msg: format!("checkpoint JSON: {e}"),
        })?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!(
                "checkpoint format {:?} not supported (expected {CHECKPOINT_FORMAT:?})",
                file.format
            )));
        }
        let mut params = ParamSet::new();
        for p in &file.params {
            let m = Matrix::from_vec(p.rows, p.cols, p.values.clone())?;
            params.insert(&p.name, m)?;
        }
        let mut state = ModelState::init(
            file.node_universe,
            &file.layer_dims,
            file.window_steps,
            0,
        )?;
        state.load_params(&params)?;
        Ok(state)
    }
}

const CHECKPOINT_FORMAT: &str = "dyngcn-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    node_universe: usize,
    layer_dims: Vec<usize>,
    window_steps: usize,
    params: Vec<NamedParam>,
}

#[derive(Serialize, Deserialize)]
struct NamedParam {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
