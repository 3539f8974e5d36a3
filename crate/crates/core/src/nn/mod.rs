//! Small deterministic network engine and the fusion regressor.
//!
//! Everything is `f64` and single-threaded; identical configs, seeds and data
//! give bitwise identical parameters and loss curves.

pub mod layers;
pub mod model;
pub mod optim;
pub mod train;

pub use model::{
    Architecture, Batch, ForwardOutput, Model, ModelConfig, Params, Subnet, SubnetSpec, Topology, DEFAULT_K,
};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use train::{evaluate, train, TrainConfig, TrainError, TrainOutcome, WeightLogEntry};
