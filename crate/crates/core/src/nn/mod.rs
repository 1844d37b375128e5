//! Differentiable building blocks with hand-written reverse-mode gradients.
//!
//! Every layer owns only [`ParamId`] handles; values live in a [`ParamStore`] and
//! gradients in a matching [`Gradients`] buffer. A forward call returns the output
//! together with whatever the backward call needs.

mod activation;
mod conv;
mod dense;
mod embedding;
pub mod gradcheck;
mod loss;
mod lstm;
mod optim;
mod params;
mod tensor;
mod treelstm;

pub use activation::{relu, sigmoid, Activation};
pub use conv::{ConvBank, ConvCache, KERNEL_COUNTS, KERNEL_SIZES};
pub use dense::{Dense, DenseCache};
pub use embedding::Embedding;
pub use loss::{cross_entropy, cross_entropy_grad, EPSILON};
pub use lstm::{Lstm, LstmCache};
pub use optim::RmsProp;
pub use params::{Gradients, Init, Param, ParamId, ParamStore};
pub use tensor::Tensor;
pub use treelstm::{BinaryTreeCache, BinaryTreeLstm, ChildSumCache, ChildSumTreeLstm, NodeState};

pub(crate) use tensor::{axpy, matvec_acc, matvec_t_acc, outer_acc};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("id {id} out of range for vocabulary of {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("input of length {len} is shorter than the widest kernel ({needed})")]
    InputTooShort { len: usize, needed: usize },
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}
