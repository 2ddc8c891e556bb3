//! Dense tensors, reverse-mode differentiation, and the Adam optimizer.

mod adam;
pub mod conv;
mod gradcheck;
mod graph;
mod real;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::ConvGeom;
pub use gradcheck::{grad_check, grad_check_many, RELATIVE_ERROR_FLOOR};
pub use graph::{Gradients, Graph, Var};
pub use real::Real;
pub use tensor::Tensor;

pub(crate) use graph::{for_each_triplet, log_softmax};
