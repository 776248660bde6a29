//! Small regression head: concat(z(u), z(v)) -> hidden ReLU layer -> scalar.
//!
//! Targets are standardized internally during training (capacities sit in
//! the hundreds of Mbit/s, far from the unit scale the optimizer likes);
//! predictions are mapped back before clipping at zero. An untrained head
//! keeps mean 0 and scale 1, so zero final-layer weights predict 0.

use crate::error::{Error, Result};
use crate::graphcore::{GraphSnapshot, NodeId};
use crate::model::Embedding;
use crate::numkit::{
    adam_step, glorot_init, matmul, relu, relu_grad, AdamConfig, AdamState, Gradients, Matrix,
    ParamSet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    /// 2d x h.
    pub w1: Matrix,
    /// 1 x h.
    pub b1: Matrix,
    /// h x 1.
    pub w2: Matrix,
    /// 1 x 1.
    pub b2: Matrix,
    target_mean: f64,
    target_scale: f64,
}

impl MlpHead {
    /// Fresh head with Glorot layers and zero biases, identity target map.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Result<MlpHead> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "mlp head needs positive dimensions, got input {input_dim}, hidden {hidden}"
            )));
        }
        Ok(MlpHead {
            w1: glorot_init(input_dim, hidden, seed.wrapping_add(1))?,
            b1: Matrix::zeros(1, hidden),
            w2: glorot_init(hidden, 1, seed.wrapping_add(2))?,
            b2: Matrix::zeros(1, 1),
            target_mean: 0.0,
            target_scale: 1.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    fn forward_standardized(&self, x: &[f64]) -> f64 {
        let h = self.w1.cols();
        let mut y = 0.0;
        for j in 0..h {
            let mut pre = self.b1.get(0, j);
            for (i, &xi) in x.iter().enumerate() {
                pre += xi * self.w1.get(i, j);
            }
            y += relu(pre) * self.w2.get(j, 0);
        }
        y + self.b2.get(0, 0)
    }

    /// Raw (unclipped) prediction for one ordered input vector.
    fn predict_vector(&self, x: &[f64]) -> f64 {
        self.forward_standardized(x) * self.target_scale + self.target_mean
    }
}

fn concat_rows(z: &Matrix, u: NodeId, v: NodeId) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * z.cols());
    x.extend_from_slice(z.row(u));
    x.extend_from_slice(z.row(v));
    x
}

/// Symmetrized prediction: mean of both orderings, floor-clipped at 0.
pub fn predict_mlp(head: &MlpHead, z: &Embedding, u: NodeId, v: NodeId) -> Result<f64> {
    if 2 * z.z.cols() != head.input_dim() {
        return Err(Error::Dimension {
            op: "predict_mlp".into(),
            lhs: (head.input_dim(), 1),
            rhs: (2 * z.z.cols(), 1),
        });
    }
    let uv = head.predict_vector(&concat_rows(&z.z, u, v));
    let vu = head.predict_vector(&concat_rows(&z.z, v, u));
    Ok((0.5 * (uv + vu)).max(0.0))
}

/// Trains the head on the observed edges of one snapshot, both orderings of
/// every edge, full-batch Adam on the squared error.
pub fn train_mlp_head(
    z: &Embedding,
    snapshot: &GraphSnapshot,
    hidden: usize,
    seed: u64,
) -> Result<MlpHead> {
    if snapshot.edge_count() == 0 {
        return Err(Error::Contract(format!(
            "mlp head: snapshot {} has no edges to train on",
            snapshot.step_index()
        )));
    }
    let d = z.z.cols();
    let mut head = MlpHead::init(2 * d, hidden, seed)?;

    let m = 2 * snapshot.edge_count();
    let mut x = Matrix::zeros(m, 2 * d);
    let mut targets = Vec::with_capacity(m);
    for (i, &(u, v, w)) in snapshot.edges().iter().enumerate() {
        x.row_mut(2 * i).copy_from_slice(&concat_rows(&z.z, u, v));
        x.row_mut(2 * i + 1).copy_from_slice(&concat_rows(&z.z, v, u));
        targets.push(w);
        targets.push(w);
    }
    let mean = targets.iter().sum::<f64>() / m as f64;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / m as f64;
    let scale = var.sqrt().max(1e-12);
    head.target_mean = mean;
    head.target_scale = scale;
    let t_std: Vec<f64> = targets.iter().map(|t| (t - mean) / scale).collect();

    let mut params = ParamSet::new();
    params.insert("W1", head.w1.clone())?;
    params.insert("b1", head.b1.clone())?;
    params.insert("W2", head.w2.clone())?;
    params.insert("b2", head.b2.clone())?;
    let mut adam = AdamState::new(&params);
    let acfg = AdamConfig::with_lr(0.01);

    for _ in 0..400 {
        let w1 = params.get("W1").unwrap();
        let b1 = params.get("b1").unwrap();
        let w2 = params.get("W2").unwrap();
        let b2 = params.get("b2").unwrap();

        let mut pre = matmul(&x, w1)?;
        for i in 0..m {
            for (p, &b) in pre.row_mut(i).iter_mut().zip(b1.row(0)) {
                *p += b;
            }
        }
        let h_act = pre.map(relu);
        let y = matmul(&h_act, w2)?;

        // dL/dy for mean squared error over the batch.
        let mut d_y = Matrix::zeros(m, 1);
        for i in 0..m {
            let pred = y.get(i, 0) + b2.get(0, 0);
            d_y.set(i, 0, 2.0 * (pred - t_std[i]) / m as f64);
        }

        let d_w2 = matmul(&h_act.transpose(), &d_y)?;
        let mut d_b2 = Matrix::zeros(1, 1);
        d_b2.set(0, 0, d_y.data().iter().sum());
        let mut d_h = matmul(&d_y, &w2.transpose())?;
        for (g, &p) in d_h.data_mut().iter_mut().zip(pre.data()) {
            *g *= relu_grad(p);
        }
        let d_w1 = matmul(&x.transpose(), &d_h)?;
        let mut d_b1 = Matrix::zeros(1, d_h.cols());
        for i in 0..m {
            for (acc, &g) in d_b1.row_mut(0).iter_mut().zip(d_h.row(i)) {
                *acc += g;
            }
        }

        let mut grads = Gradients::zeros_like(&params);
        grads.accumulate("W1", &d_w1)?;
        grads.accumulate("b1", &d_b1)?;
        grads.accumulate("W2", &d_w2)?;
        grads.accumulate("b2", &d_b2)?;
        adam_step(&mut params, &grads, &mut adam, &acfg)?;
    }

    head.w1 = params.get("W1").unwrap().clone();
    head.b1 = params.get("b1").unwrap().clone();
    head.w2 = params.get("W2").unwrap().clone();
    head.b2 = params.get("b2").unwrap().clone();
    Ok(head)
}
