//! Normalized proposals `r(x, y)` and their information estimates `I_r`.

mod gaussian;
mod pq;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use gaussian::{ba_ir_estimate, doe_ir_estimate, CondGaussian, DiagonalGaussian, Moments};
pub use pq::{pq_ir_estimate, CodeClassifier, PqClassifier, CLASSIFIER_HIDDEN};

use crate::benchmarks::SampleBatch;
use crate::nn::AdamState;
use crate::quantization::Quantizer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    /// `p(x) p(y)`: no generative component.
    None,
    CondGaussian,
    Pq,
}

impl ProposalKind {
    pub fn name(self) -> &'static str {
        match self {
            ProposalKind::None => "none",
            ProposalKind::CondGaussian => "cond-gaussian",
            ProposalKind::Pq => "pq",
        }
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the conditional-Gaussian proposal accounts for `H(y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalMode {
    /// Oracle entropy from the benchmark.
    Ba,
    /// Cross-entropy under a fitted diagonal Gaussian.
    Doe,
}

/// Reference term completing `E[log r(y|x)]` into an information estimate.
#[derive(Clone, Debug, PartialEq)]
pub enum MarginalReference {
    Entropy(f64),
    Fitted(DiagonalGaussian),
}

/// A proposal in use by a hybrid estimator.
#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    MarginalProduct,
    CondGaussian {
        model: CondGaussian,
        reference: MarginalReference,
    },
    Pq {
        quantizer: Quantizer,
        classifier: PqClassifier,
    },
}

impl Proposal {
    pub fn kind(&self) -> ProposalKind {
        match self {
            Proposal::MarginalProduct => ProposalKind::None,
            Proposal::CondGaussian { .. } => ProposalKind::CondGaussian,
            Proposal::Pq { .. } => ProposalKind::Pq,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Proposal::MarginalProduct => 0,
            Proposal::CondGaussian { model, .. } => model.n_params(),
            Proposal::Pq { classifier, .. } => classifier.n_params(),
        }
    }

    /// The batch estimate of `I_r`.
    pub fn generative_part(&self, batch: &SampleBatch) -> f64 {
        match self {
            Proposal::MarginalProduct => 0.0,
            Proposal::CondGaussian { model, reference } => match reference {
                MarginalReference::Entropy(h) => ba_ir_estimate(model, batch, *h),
                MarginalReference::Fitted(s) => doe_ir_estimate(model, s, batch),
            },
            Proposal::Pq { quantizer, classifier } => {
                pq_ir_estimate(classifier, batch, quantizer.code_entropy())
            }
        }
    }

    /// One Adam step on the proposal's own likelihood objective. Returns the
    /// loss before the step (0 for the marginal product).
    pub fn train_step(&mut self, batch: &SampleBatch, adam: &mut AdamState) -> f64 {
        match self {
            Proposal::MarginalProduct => 0.0,
            Proposal::CondGaussian { model, .. } => model.train_step(batch, adam),
            Proposal::Pq { classifier, .. } => classifier.train_step(batch, adam),
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        match self {
            Proposal::MarginalProduct => Vec::new(),
            Proposal::CondGaussian { model, .. } => model.net().params().to_vec(),
            Proposal::Pq { classifier, .. } => classifier.net().params().to_vec(),
        }
    }
}
