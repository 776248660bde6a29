//! Run configuration: defaults, TOML file loading, and `--set key=value`
//! overrides. Precedence is CLI flags > `--set` pairs > config file >
//! built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dyngcn::dataio::SynthConfig;
use dyngcn::error::{Error, Result};
use dyngcn::eval::{FutureWeight, HeadKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Event manifest to load. Exactly one of `data` and `synth` may be set
    /// for commands that consume a dataset.
    pub data: Option<PathBuf>,
    /// Synthetic event to generate in place of a dataset on disk.
    pub synth: Option<SynthConfig>,
    /// Output directory for all artifacts and reports.
    pub out: PathBuf,
    /// Overwrite existing outputs.
    pub force: bool,
    /// Keep measured wall times in trace CSVs instead of zeroing them.
    pub timing: bool,
    /// Master seed; every derived seed (per step, per sweep cell, per head)
    /// comes from it.
    pub seed: u64,
    /// Evolution window w.
    pub window: usize,
    /// GCN layer widths; the last entry is the embedding dimension d.
    pub dims: Vec<usize>,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub patience: usize,
    pub learning_rate: f64,
    pub warm_start: bool,
    /// Ablation: only the evolution transforms H_i receive updates.
    pub train_only_h: bool,
    /// Step k to train or evaluate at; defaults to K-2, the last step whose
    /// test set can be non-empty.
    pub step: Option<usize>,
    /// Train and evaluate at every step instead of only `step`.
    pub all_steps: bool,
    /// Prediction head used by eval and sweep.
    pub head: HeadKind,
    /// Hidden width of the MLP head; 0 means "use the embedding dimension".
    pub mlp_hidden: usize,
    /// True-weight rule for future edges seen more than once.
    pub future_weight: FutureWeight,
    /// Also score a static baseline and write a comparison table.
    pub baseline: bool,
    /// Checkpoint to evaluate; defaults to `<out>/checkpoint.json`.
    pub checkpoint: Option<PathBuf>,
    /// Sweep grid: window sizes.
    pub sweep_windows: Vec<usize>,
    /// Sweep grid: embedding dimensions d (each cell trains dims [2d, d]).
    pub sweep_dims: Vec<usize>,
    /// Repetitions per sweep cell, each with its own derived seed.
    pub sweep_reps: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            data: None,
            synth: None,
            out: PathBuf::from("out"),
            force: false,
            timing: false,
            seed: 0,
            window: 3,
            dims: vec![32, 16],
            max_epochs: 500,
            tolerance: 1e-4,
            patience: 10,
            learning_rate: 0.01,
            warm_start: false,
            train_only_h: false,
            step: None,
            all_steps: false,
            head: HeadKind::Inner,
            mlp_hidden: 0,
            future_weight: FutureWeight::Earliest,
            baseline: false,
            checkpoint: None,
            sweep_windows: vec![1, 2, 3, 4, 5],
            sweep_dims: vec![8, 16, 32, 64],
            sweep_reps: 3,
        }
    }
}

impl RunConfig {
    pub fn load_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count());
            Error::Parse {
                file: path.into(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    /// Applies one `key=value` override. Keys mirror the TOML field names;
    /// synthetic-event fields live under `synth.`, list values are
    /// comma-separated.
    pub fn apply_set(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects key=value, got '{pair}'"))
        })?;
        let (key, value) = (key.trim(), value.trim());

        if let Some(field) = key.strip_prefix("synth.") {
            let synth = self.synth.get_or_insert_with(SynthConfig::default);
            return apply_synth_set(synth, field, value);
        }

        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "force" => self.force = parse(key, value)?,
            "timing" => self.timing = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "dims" => self.dims = parse_list(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "warm_start" => self.warm_start = parse(key, value)?,
            "train_only_h" => self.train_only_h = parse(key, value)?,
            "step" => self.step = Some(parse(key, value)?),
            "all_steps" => self.all_steps = parse(key, value)?,
            "head" => self.head = value.parse()?,
            "mlp_hidden" => self.mlp_hidden = parse(key, value)?,
            "future_weight" => self.future_weight = value.parse()?,
            "baseline" => self.baseline = parse(key, value)?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "sweep_windows" => self.sweep_windows = parse_list(key, value)?,
            "sweep_dims" => self.sweep_dims = parse_list(key, value)?,
            "sweep_reps" => self.sweep_reps = parse(key, value)?,
            other => {
                return Err(Error::Config(format!("--set: unknown key '{other}'")))
            }
        }
        Ok(())
    }

    /// Short hash over every field that influences computed results; file
    /// locations and overwrite/timing switches are excluded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "data={:?};synth={:?};seed={};window={};dims={:?};max_epochs={};tolerance={:e};\
             patience={};learning_rate={:e};warm_start={};train_only_h={};step={:?};\
             all_steps={};head={};mlp_hidden={};future_weight={};baseline={};\
             sweep_windows={:?};sweep_dims={:?};sweep_reps={}",
            self.data,
            self.synth,
            self.seed,
            self.window,
            self.dims,
            self.max_epochs,
            self.tolerance,
            self.patience,
            self.learning_rate,
            self.warm_start,
            self.train_only_h,
            self.step,
            self.all_steps,
            self.head,
            self.mlp_hidden,
            self.future_weight,
            self.baseline,
            self.sweep_windows,
            self.sweep_dims,
            self.sweep_reps,
        ));
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("--set {key}: cannot parse '{value}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn apply_synth_set(synth: &mut SynthConfig, field: &str, value: &str) -> Result<()> {
    let key = format!("synth.{field}");
    let key = key.as_str();
    match field {
        "name" => synth.name = value.to_string(),
        "offices" => synth.offices = parse(key, value)?,
        "viewers_per_office" => synth.viewers_per_office = parse(key, value)?,
        "snapshots" => synth.snapshots = parse(key, value)?,
        "interval_minutes" => synth.interval_minutes = parse(key, value)?,
        "intra_weight_mean" => synth.intra_weight_mean = parse(key, value)?,
        "intra_weight_std" => synth.intra_weight_std = parse(key, value)?,
        "inter_weight_mean" => synth.inter_weight_mean = parse(key, value)?,
        "inter_weight_std" => synth.inter_weight_std = parse(key, value)?,
        "arrival_fractions" => synth.arrival_fractions = parse_list(key, value)?,
        "rewire_start" => synth.rewire_start = parse(key, value)?,
        "rewire_end" => synth.rewire_end = parse(key, value)?,
        "reconnect_probability" => synth.reconnect_probability = parse(key, value)?,
        "intra_probability" => synth.intra_probability = parse(key, value)?,
        "edges_per_arrival" => synth.edges_per_arrival = parse(key, value)?,
        "connection_cap" => synth.connection_cap = parse(key, value)?,
        "seed" => synth.seed = parse(key, value)?,
        other => {
            return Err(Error::Config(format!("--set: unknown key 'synth.{other}'")))
        }
    }
    Ok(())
}
