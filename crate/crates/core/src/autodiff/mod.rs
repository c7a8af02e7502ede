//! Minimal reverse-mode automatic differentiation over `f64` matrices, with
//! the transformer layers, optimizer and checkpoint format the agents use.

pub mod checkpoint;
mod graph;
pub mod nn;
mod optim;
mod params;
mod tensor;

pub use graph::{Graph, Var};
pub use nn::{init_params, positional_encoding, Arch, Ctx};
pub use optim::Adam;
pub use params::{Grads, Init, Initializer, ParamStore};
pub use tensor::Tensor;

pub(crate) use graph::softmax_in_place;
