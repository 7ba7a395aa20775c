//! Node classifiers on graphs with a small reverse-mode autodiff core.
//!
//! Architectures: MLP, GCN, GAT and the parameterized variants PD-GCN
//! (aggregation with `P(alpha, gamma)`) and PD-GAT (attention with edge
//! features from the first non-trivial eigenvector). Everything runs in
//! `f64` on a single thread and is deterministic for a fixed seed.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use model::{Arch, Metric, Model, ModelConfig};
pub use tape::{Gradients, Pairs, SparseOp, Tape, Var};
pub use tensor::Tensor;
pub use train::{accuracy, binary_auc, cross_entropy, evaluate, roc_auc, train, Adam, TrainReport};
