//! Dense and sparse linear algebra, activations, initialization, and the
//! optimizer used by the model.

mod adam;
mod gradcheck;
mod init;
mod matrix;
mod ops;
mod params;
mod sparse;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport, WorstCoordinate};
pub use init::{derive_seed, glorot_bound, glorot_init, glorot_init_from_rng};
pub use matrix::{matmul, Matrix};
pub use ops::{elu, elu_grad, relu, relu_grad, sigmoid, sigmoid_grad_from_output, softmax};
pub use params::{Gradients, ParamSet};
pub use sparse::{spmm, SparseMatrix};
