//! The hybrid estimator: a normalized proposal supplies `I_r`, a critic trained
//! against proposal samples supplies the remaining `KL(p || r)`.

mod sampling;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sampling::{
    resample_negatives, sample_conditional_batch, sample_joint_batch, shuffle_negatives, CodeIndex,
};

use crate::benchmarks::SampleBatch;
use crate::estimators::{bounds, Critic, Estimator, EstimatorConfig, EstimatorKind, MIEstimate, Negatives};
use crate::nn::AdamState;
use crate::proposals::{Proposal, ProposalKind};
use crate::rng::{stream, Rng};
use crate::{Error, Result};

/// Number of scores carried in a non-finite diagnostic.
const DIAGNOSTIC_SCORES: usize = 8;

/// A dataset prepared for one proposal: under PQ every row carries its code
/// and rows are indexed by code.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    data: SampleBatch,
    index: Option<CodeIndex>,
}

impl TrainingSet {
    pub fn new(mut data: SampleBatch, proposal: &Proposal) -> Result<Self> {
        let index = match proposal {
            Proposal::Pq { quantizer, .. } => {
                let codes = quantizer.quantize_rows(data.x.view());
                let index = CodeIndex::new(&codes, quantizer.n_codes());
                if index.sampleable_codes().is_empty() {
                    return Err(Error::NoSampleableCode);
                }
                data.codes = Some(codes);
                Some(index)
            }
            _ => None,
        };
        Ok(Self { data, index })
    }

    pub fn data(&self) -> &SampleBatch {
        &self.data
    }

    pub fn index(&self) -> Option<&CodeIndex> {
        self.index.as_ref()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// What one training step reports, measured before its parameter updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub estimate: MIEstimate,
    /// Proposal loss (negative log-likelihood or code cross-entropy).
    pub proposal_loss: f64,
    pub clamped_scores: usize,
    /// Contrastive (InfoNCE) value of the same scores, at most `log(K + 1)`.
    pub contrastive: f64,
}

/// Proposal plus critic, trained jointly. The critic objective sees proposal
/// samples and log-densities as constants and the proposal objective never
/// sees the critic.
#[derive(Clone, Debug)]
pub struct HybridEstimator {
    proposal: Proposal,
    critic: Critic,
    estimator: Estimator,
    batch_size: usize,
    negatives: usize,
    critic_adam: AdamState,
    proposal_adam: AdamState,
}

impl HybridEstimator {
    /// `negatives = None` pairs each row with every other row of its batch.
    pub fn new(
        proposal: Proposal,
        critic: Critic,
        estimator: EstimatorConfig,
        batch_size: usize,
        negatives: Option<usize>,
        learning_rate: f64,
    ) -> Self {
        assert!(batch_size >= 2, "batch size must be at least 2");
        let negatives = negatives.unwrap_or(batch_size - 1);
        assert!(negatives >= 1, "need at least one negative per row");
        let critic_adam = AdamState::with_learning_rate(critic.n_params(), learning_rate);
        let proposal_adam = AdamState::with_learning_rate(proposal.n_params(), learning_rate);
        Self {
            proposal,
            critic,
            estimator: Estimator::new(estimator),
            batch_size,
            negatives,
            critic_adam,
            proposal_adam,
        }
    }

    /// Separate step sizes; a zero rate freezes that side.
    pub fn with_learning_rates(mut self, critic: f64, proposal: f64) -> Self {
        self.critic_adam.learning_rate = critic;
        self.proposal_adam.learning_rate = proposal;
        self
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn estimator_kind(&self) -> EstimatorKind {
        self.estimator.kind()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn negatives(&self) -> usize {
        self.negatives
    }

    pub fn draw_batch(&self, set: &TrainingSet, rng: &mut Rng) -> Result<SampleBatch> {
        match (&self.proposal, set.index()) {
            (Proposal::Pq { .. }, Some(index)) => sample_conditional_batch(index, set.data(), self.batch_size, rng),
            (Proposal::Pq { .. }, None) => panic!("PQ training set has no code index"),
            _ => Ok(sample_joint_batch(set.data(), self.batch_size, rng)),
        }
    }

    /// Proposal pairs for a batch: shuffled partners, or fresh conditional
    /// draws under the Gaussian proposal.
    pub fn draw_negatives(&self, batch: &SampleBatch, rng: &mut Rng) -> Negatives {
        let k = self.negatives;
        match &self.proposal {
            Proposal::CondGaussian { model, .. } => Negatives::Drawn {
                y: model.sample(batch.x.view(), k, rng),
                k,
            },
            _ if k < batch.len() => shuffle_negatives(batch.len(), k, rng),
            _ => resample_negatives(batch.len(), k, rng),
        }
    }

    /// One iteration: draw a batch, report its estimate, then take one Adam
    /// step on the critic and one on the proposal.
    pub fn hybrid_step(&mut self, set: &TrainingSet, step: usize, rng: &mut Rng) -> Result<StepOutcome> {
        let batch = self.draw_batch(set, rng)?;
        let negatives = self.draw_negatives(&batch, rng);

        let generative = self.proposal.generative_part(&batch);
        let pass = self.critic.forward(&batch, &negatives);
        let objective = self.estimator.objective(&pass.joint, pass.negatives.view());
        let diagnostics = || pass.joint.iter().take(DIAGNOSTIC_SCORES).copied().collect();
        if !objective.value.is_finite() || !objective.loss.is_finite() {
            return Err(Error::NonFinite {
                step,
                component: "critic",
                last_scores: diagnostics(),
            });
        }
        if !generative.is_finite() {
            return Err(Error::NonFinite {
                step,
                component: "proposal",
                last_scores: diagnostics(),
            });
        }
        let grads = self.critic.backward(&pass, &objective.d_joint, objective.d_negatives.view());
        self.critic.adam_step(&mut self.critic_adam, &grads);
        let proposal_loss = self.proposal.train_step(&batch, &mut self.proposal_adam);
        if !proposal_loss.is_finite() {
            return Err(Error::NonFinite {
                step,
                component: "proposal",
                last_scores: diagnostics(),
            });
        }
        Ok(StepOutcome {
            estimate: MIEstimate::new(generative, objective.value, batch.len(), negatives.per_row()),
            proposal_loss,
            clamped_scores: objective.clamped,
            contrastive: bounds::infonce(&pass.joint, pass.negatives.view()).value,
        })
    }

    /// Trains proposal and critic together for `config.iterations` steps.
    /// `on_step` sees every step's outcome; the returned curve keeps every
    /// `config.curve_every`-th.
    pub fn two_step_fit(
        &mut self,
        set: &TrainingSet,
        config: &FitConfig,
        rng: &mut Rng,
        mut on_step: impl FnMut(usize, &StepOutcome),
    ) -> Result<FitReport> {
        let mut report = FitReport::default();
        for step in 1..=config.iterations {
            let outcome = self.hybrid_step(set, step, rng)?;
            report.clamped_scores += outcome.clamped_scores;
            if config.curve_every > 0 && step % config.curve_every == 0 {
                report.curve.push(CurveRow::new(step, self, &outcome.estimate));
            }
            on_step(step, &outcome);
        }
        Ok(report)
    }

    /// The estimate of one batch without touching any state.
    pub fn estimate(&self, batch: &SampleBatch, negatives: &Negatives) -> MIEstimate {
        let pass = self.critic.forward(batch, negatives);
        let disc = self.estimator.value(&pass.joint, pass.negatives.view());
        MIEstimate::new(self.proposal.generative_part(batch), disc, batch.len(), negatives.per_row())
    }

    /// Estimates on `n_batches` fresh batches, each with its own RNG stream
    /// derived from `seed`. Batches are evaluated in parallel.
    pub fn evaluate_frozen(&self, set: &TrainingSet, n_batches: usize, seed: u64) -> Result<Vec<MIEstimate>> {
        (0..n_batches)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let batch = self.draw_batch(set, &mut rng)?;
                let negatives = self.draw_negatives(&batch, &mut rng);
                Ok(self.estimate(&batch, &negatives))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iterations: usize,
    pub curve_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            curve_every: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitReport {
    pub curve: Vec<CurveRow>,
    pub clamped_scores: usize,
}

/// One line of a training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub estimator: EstimatorKind,
    pub proposal: ProposalKind,
    pub generative_part: f64,
    pub discriminative_part: f64,
    pub total: f64,
}

impl CurveRow {
    fn new(step: usize, est: &HybridEstimator, e: &MIEstimate) -> Self {
        Self {
            step,
            estimator: est.estimator_kind(),
            proposal: est.proposal().kind(),
            generative_part: e.generative_part,
            discriminative_part: e.discriminative_part,
            total: e.total,
        }
    }
}

/// Writes curve rows as CSV with a header line.
pub fn write_curve<W: Write>(writer: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
