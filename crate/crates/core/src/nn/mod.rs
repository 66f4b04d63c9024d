//! From-scratch neural network pieces for sequence-to-attitude models.
//!
//! All tensors are dense `f64` matrices. Sequence batches are time-major
//! (`row = t · batch + b`), which keeps every layer a handful of matrix
//! products. Each layer has a forward pass that records what it needs and a
//! hand-written backward pass; there is no general autodiff graph.

pub mod activation;
pub mod batchnorm;
pub mod checkpoint;
pub mod conv;
pub mod head;
pub mod linear;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod params;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use loss::LossKind;
pub use model::{Arch, NetConfig, Network, RnnState};
pub use optim::{OptimConfig, Optimizer};
pub use tensor::Tensor2;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{lr_find, predict, train, train_network, train_with, EpochRecord, History, TrainConfig};
