//! Minimal CPU network engine: NHWC tensors, 3x3 convolutions, batch
//! normalization, activations, the residual FCN, Nadam, and model files.

pub mod io;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;

pub use io::{load_model, save_model};
pub use model::{Gradients, LayerSpec, NetworkModel};
pub use optim::Nadam;
pub use tensor::Tensor4;
