//! Dense linear algebra, a static computation graph with reverse-mode
//! differentiation, the RMSProp optimizer, gradient clipping, and a
//! finite-difference gradient checker.

pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod tensor;

pub use gradcheck::{grad_check, max_error, relative_error, GradCheckReport};
pub use graph::{bernoulli_kl_scalar, Gradients, Graph, NodeId, ParamId, ParamSet};
pub use optim::{clip_global_norm, RmsProp};
pub use tensor::{
    log_softmax_rows, matmul, set_threads, sigmoid, sigmoid_scalar, softmax_rows, softplus, tanh,
    Tensor,
};
