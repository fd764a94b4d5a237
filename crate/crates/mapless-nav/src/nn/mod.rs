//! Minimal differentiable-network engine in f64: row-major matrices with
//! deterministic blocked kernels, dense/LSTM/1-D-conv layers with manual
//! backward passes, Adam with bias correction, soft target updates,
//! finite-difference gradient verification, and a binary checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod mat;
pub mod network;
pub mod params;

pub use mat::Mat;
pub use network::{Network, Tape};
pub use params::{soft_update, ParamArena};
