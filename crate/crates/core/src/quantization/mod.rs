//! Discrete codes `Q(x)` for predictive quantization.

mod eig;
mod entropy;
mod kmeans;
mod quantizer;
mod sign;
mod tica;

pub use eig::symmetric_eig;
pub use entropy::{discrete_entropy, entropy_of_probabilities};
pub use kmeans::{kmeans_fit, nearest, KMeansFit, MAX_LLOYD_ITERATIONS, N_RESTARTS};
pub use quantizer::{Projection, Quantizer, QuantizerKind};
pub use sign::{sign_quantize, MAX_SIGN_DIMS};
pub use tica::{tica_fit, TicaModel, C0_REGULARIZATION};
