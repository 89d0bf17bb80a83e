//! Networks and optimization: a scalar autodiff tape, batched multilayer
//! perceptrons, and Adam.

mod adam;
mod mlp;
pub mod tape;

pub use adam::{AdamState, DEFAULT_LEARNING_RATE};
pub use mlp::{Activation, ForwardCache, Mlp, MlpSpec, DEFAULT_HIDDEN, LOG_VAR_MAX, LOG_VAR_MIN};
pub use tape::{ParamTape, Var};
