//! Minimal differentiable core: tensors, the layers both networks need with
//! hand-written backward passes, Adam, a checkpoint container and a
//! finite-difference gradient checker.
//!
//! There is no tape. Each layer returns a cache from `forward` and consumes
//! it in `backward`, accumulating parameter gradients into the parameter
//! tensors' own grad buffers.

mod adam;
mod checkpoint;
mod conv;
mod dense;
pub(crate) mod gemm;
mod gradcheck;
pub mod init;
mod loss;
mod lstm;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use conv::{
    conv2d, conv2d_backward, conv2d_cached, conv2d_transpose, conv2d_transpose_backward, ConvCache, ConvGrads,
    ConvSpec, Padding,
};
pub use dense::{dense, relu, relu_backward_in_place, relu_in_place, Activation, Dense, DenseCache};
pub use gradcheck::{finite_diff_grad_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use rng::Rng;
pub use tensor::Tensor;

/// Default probe step for [`finite_diff_grad_check`].
pub const GRAD_CHECK_EPSILON: f64 = gradcheck::DEFAULT_EPSILON;

/// Hex SHA-256 over the raw little-endian bytes of each tensor in order.
pub fn param_digest<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in params {
        for d in p.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        for v in p.data() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
