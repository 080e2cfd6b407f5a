//! Dense networks with exact backpropagation, Adam and Polyak-averaged targets.

mod mlp;
mod target;
mod tensor;
pub mod zero_fit;

pub use mlp::{Gradients, InitKind, InitScheme, MlpNet, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub(crate) use mlp::{read_f64, read_u64};
pub use target::{polyak_update, TargetNet};
pub use tensor::Tensor;
pub use zero_fit::{zero_fit_demo, ZeroFitConfig, ZeroFitReport};
