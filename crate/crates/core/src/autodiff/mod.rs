//! Reverse-mode differentiation over dense `f64` tensors.

mod tape;
mod tensor;

pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;
