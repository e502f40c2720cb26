//! Dense f32 arrays and the forward/backward kernels the fixed encoder needs.
//!
//! Every kernel is a pure function of its inputs. Differentiable ops return an
//! [`OpGrad`] holding the output and the state needed to map an output gradient
//! back onto input and parameter gradients.

mod container;
mod conv;
mod gemm;
mod ops;
mod optim;
mod tensor;

pub use container::{tensor_text, text_tensor, TensorFile, MAGIC, VERSION};
pub use conv::{conv2d, conv2d_forward, Conv2dBackward, Conv2dGrads};
pub use ops::{relu, relu_forward, resize, resize_backward, ReluBackward, ResizeMode};
pub use optim::{lars_step, sgd_step, Sgd};
pub use tensor::Tensor;

pub(crate) use gemm::{gemm, Layout};

/// Output of a differentiable op together with its backward state.
#[derive(Clone, Debug)]
pub struct OpGrad<B> {
    pub output: Tensor,
    pub backward: B,
}
