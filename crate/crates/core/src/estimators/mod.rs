//! Critics and the discriminative objectives that turn their scores into an
//! estimate of `E_p[f] - log E_r[e^f]`.

pub mod bounds;
mod critic;

use std::fmt;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use bounds::{BiasCorrectedEma, ScoreObjective, SCORE_CLAMP};
pub use critic::{Critic, CriticConfig, CriticKind, CriticPass, Negatives, DEFAULT_EMBEDDING_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Nwj,
    Mine,
    Infonce,
    Js,
    Smile,
    NwjInfonce,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Nwj,
        EstimatorKind::Mine,
        EstimatorKind::Infonce,
        EstimatorKind::Js,
        EstimatorKind::Smile,
        EstimatorKind::NwjInfonce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Nwj => "nwj",
            EstimatorKind::Mine => "mine",
            EstimatorKind::Infonce => "infonce",
            EstimatorKind::Js => "js",
            EstimatorKind::Smile => "smile",
            EstimatorKind::NwjInfonce => "nwj-infonce",
        }
    }

    /// Whether adding a constant to every score leaves the value unchanged.
    pub fn shift_invariant(self) -> bool {
        matches!(self, EstimatorKind::Mine | EstimatorKind::Infonce | EstimatorKind::Smile)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Clipping threshold of the SMILE partition term.
    pub tau: f64,
    /// Interpolation weight of the NWJ/InfoNCE baseline.
    pub alpha: f64,
    /// Decay of MINE's running partition average.
    pub ema_decay: f64,
    /// Use the NWJ formula without the `+1` offset.
    pub appendix_b_literal: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::Smile,
            tau: 5.0,
            alpha: 0.5,
            ema_decay: 0.99,
            appendix_b_literal: false,
        }
    }
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0) {
            return Err(format!("estimator.tau must be positive, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("estimator.alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(format!("estimator.ema_decay must lie in [0, 1), got {}", self.ema_decay));
        }
        Ok(())
    }
}

/// A discriminative objective plus its training state (MINE's running average).
#[derive(Clone, Debug)]
pub struct Estimator {
    config: EstimatorConfig,
    ema: BiasCorrectedEma,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Self {
        if let Err(e) = config.validate() {
            panic!("{e}");
        }
        let ema = BiasCorrectedEma::new(config.ema_decay);
        Self { config, ema }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn kind(&self) -> EstimatorKind {
        self.config.kind
    }

    /// Value, loss and score gradients for one training batch. Advances the
    /// MINE running average.
    pub fn objective(&mut self, joint: &[f64], negatives: ArrayView2<'_, f64>) -> ScoreObjective {
        let c = &self.config;
        match c.kind {
            EstimatorKind::Nwj => bounds::nwj(joint, negatives, c.appendix_b_literal),
            EstimatorKind::Mine => bounds::mine(joint, negatives, &mut self.ema),
            EstimatorKind::Infonce => bounds::infonce(joint, negatives),
            EstimatorKind::Js => bounds::js(joint, negatives, c.appendix_b_literal),
            EstimatorKind::Smile => bounds::smile(joint, negatives, c.tau),
            EstimatorKind::NwjInfonce => bounds::interpolated(joint, negatives, c.alpha),
        }
    }

    /// The reported value only; no state changes.
    pub fn value(&self, joint: &[f64], negatives: ArrayView2<'_, f64>) -> f64 {
        let c = &self.config;
        match c.kind {
            EstimatorKind::Nwj | EstimatorKind::Js => bounds::nwj(joint, negatives, c.appendix_b_literal).value,
            EstimatorKind::Mine => bounds::dv_value(joint, negatives).0,
            EstimatorKind::Infonce => bounds::infonce(joint, negatives).value,
            EstimatorKind::Smile => bounds::smile_value(joint, negatives, c.tau).0,
            EstimatorKind::NwjInfonce => bounds::interpolated(joint, negatives, c.alpha).value,
        }
    }
}

/// An information estimate split into its proposal and critic contributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub total: f64,
    pub generative_part: f64,
    pub discriminative_part: f64,
    pub n_joint: usize,
    pub n_proposal: usize,
}

impl MIEstimate {
    pub fn new(generative_part: f64, discriminative_part: f64, n_joint: usize, n_proposal: usize) -> Self {
        Self {
            total: generative_part + discriminative_part,
            generative_part,
            discriminative_part,
            n_joint,
            n_proposal,
        }
    }
}
