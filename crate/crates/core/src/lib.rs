pub mod benchmarks;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod hybrid;
pub mod math;
pub mod nn;
pub mod proposals;
pub mod quantization;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub mod benchmarks {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    pub mod estimators {}
    #[doc = include_str!("../../../book/src/proposals.md")]
    pub mod proposals {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    pub mod quantization {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    pub mod hybrid {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
