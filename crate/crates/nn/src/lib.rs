//! A small differentiable tensor engine for convolutional classifiers.
//!
//! Layers implement [`Module`] with an explicit `forward`/`backward` pair that
//! caches whatever the backward pass needs. There is no general autodiff graph:
//! networks are [`Sequential`] chains, possibly containing [`ResidualBlock`]s.

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod conv;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod loss;
pub mod module;
pub mod residual;
pub mod sequential;
pub mod tensor;

pub use activation::{GlobalAvgPool, Relu};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::BatchNorm;
pub use conv::{conv_out_len, Conv2d};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport};
pub use linear::Linear;
pub use loss::{softmax, softmax_cross_entropy};
pub use module::{Mode, Module, Param, Slot};
pub use residual::ResidualBlock;
pub use sequential::{Layer, Sequential};
pub use tensor::Tensor;
