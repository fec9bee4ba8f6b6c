//! Dense linear algebra, activations, initialization, Adam, and gradient checking.

pub mod activation;
pub mod adam;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod mlp;
pub mod tensor;

pub use activation::{argmax, gelu, gelu_grad, log_sum_exp, sigmoid, softmax};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{compare_at, finite_diff_at, finite_diff_grad, max_relative_error, sample_coords, GradComparison};
pub use gru::{gru_step, GruParams};
pub use init::xavier_uniform;
pub use mlp::{mlp_forward, Linear, MlpParams};
pub use tensor::{ParamSet, Tensor};
