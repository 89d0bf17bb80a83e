//! Stacked mixture of four correlated bivariate normals.
//!
//! Each stack is a pair `(x_k, y_k)` drawn from an equal-weight mixture whose
//! components share the covariance `[[1, rho], [rho, 1]]` and whose means are
//! placed so that both marginals and both conditionals are bimodal. Stacks
//! are independent, so the total information is `n_stacks` times that of a
//! single pair.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quadrature::adaptive_simpson;
use super::SampleBatch;
use crate::math::{log_sum_exp, mean_and_std_error, normal_log_pdf, LN_2PI};
use crate::rng::Rng;
use crate::Result;

pub const MIXING_PROPORTIONS: [f64; 4] = [0.25; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianMixtureTask {
    pub n_stacks: usize,
    pub eps_mix: f64,
    pub delta_mix: f64,
    pub correlation: f64,
    pub dataset_size: usize,
}

impl Default for GaussianMixtureTask {
    fn default() -> Self {
        Self {
            n_stacks: 5,
            eps_mix: 1.0,
            delta_mix: 2.0,
            correlation: 0.95,
            dataset_size: 100_000,
        }
    }
}

/// A Monte Carlo ground-truth value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Per-row log-densities of a batch under the task distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct LogDensities {
    pub joint: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl GaussianMixtureTask {
    /// The single-Gaussian special case (all component means at the origin).
    pub fn collapsed(n_stacks: usize) -> Self {
        Self {
            n_stacks,
            eps_mix: 0.0,
            delta_mix: 0.0,
            ..Self::default()
        }
    }

    pub fn component_means(&self) -> [[f64; 2]; 4] {
        let (e, d) = (self.eps_mix, self.delta_mix);
        [
            [e + d, -e + d],
            [-e - d, e - d],
            [e - d, -e - d],
            [-e + d, e + d],
        ]
    }

    fn cov_det(&self) -> f64 {
        1.0 - self.correlation * self.correlation
    }

    /// Joint log-density of one pair.
    pub fn pair_log_density(&self, x: f64, y: f64) -> f64 {
        let rho = self.correlation;
        let det = self.cov_det();
        let terms = self.component_means().map(|[mx, my]| {
            let (dx, dy) = (x - mx, y - my);
            let quad = (dx * dx - 2.0 * rho * dx * dy + dy * dy) / det;
            MIXING_PROPORTIONS[0].ln() - LN_2PI - 0.5 * det.ln() - 0.5 * quad
        });
        log_sum_exp(terms)
    }

    /// Log-density of one coordinate of `x` (`axis = 0`) or `y` (`axis = 1`).
    pub fn marginal_log_density(&self, axis: usize, v: f64) -> f64 {
        let terms = self
            .component_means()
            .map(|m| MIXING_PROPORTIONS[0].ln() + normal_log_pdf(v, m[axis], 1.0));
        log_sum_exp(terms)
    }

    fn draw_pair(&self, rng: &mut Rng) -> (usize, f64, f64) {
        let c = rng.random_range(0..4);
        let [mx, my] = self.component_means()[c];
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let rho = self.correlation;
        (c, mx + z1, my + rho * z1 + self.cov_det().sqrt() * z2)
    }

    /// `n` i.i.d. joint draws; column `k` of `x` and `y` holds stack `k`.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> SampleBatch {
        assert!(n >= 1, "sample size must be positive");
        let mut x = Array2::zeros((n, self.n_stacks));
        let mut y = Array2::zeros((n, self.n_stacks));
        for i in 0..n {
            for k in 0..self.n_stacks {
                let (_, a, b) = self.draw_pair(rng);
                x[[i, k]] = a;
                y[[i, k]] = b;
            }
        }
        SampleBatch::new(x, y)
    }

    /// Single-stack draws together with the mixture component of each.
    pub fn sample_with_components(&self, n: usize, rng: &mut Rng) -> Vec<(usize, f64, f64)> {
        (0..n).map(|_| self.draw_pair(rng)).collect()
    }

    pub fn log_densities(&self, batch: &SampleBatch) -> LogDensities {
        assert_eq!(batch.x_dim(), self.n_stacks, "x dimension does not match stacks");
        assert_eq!(batch.y_dim(), self.n_stacks, "y dimension does not match stacks");
        let n = batch.len();
        let mut out = LogDensities {
            joint: vec![0.0; n],
            x: vec![0.0; n],
            y: vec![0.0; n],
        };
        for i in 0..n {
            for k in 0..self.n_stacks {
                let (a, b) = (batch.x[[i, k]], batch.y[[i, k]]);
                out.joint[i] += self.pair_log_density(a, b);
                out.x[i] += self.marginal_log_density(0, a);
                out.y[i] += self.marginal_log_density(1, b);
            }
        }
        out
    }

    /// Monte Carlo mutual information: the per-pair average of
    /// `log p(x,y) - log p(x) - log p(y)`, scaled by the number of stacks.
    pub fn true_mi(&self, n_mc: usize, rng: &mut Rng) -> OracleEstimate {
        assert!(n_mc >= 10_000, "at least 10 000 Monte Carlo draws are required");
        let values: Vec<f64> = (0..n_mc)
            .map(|_| {
                let (_, a, b) = self.draw_pair(rng);
                self.pair_log_density(a, b)
                    - self.marginal_log_density(0, a)
                    - self.marginal_log_density(1, b)
            })
            .collect();
        let (m, se) = mean_and_std_error(&values);
        let k = self.n_stacks as f64;
        OracleEstimate {
            estimate: k * m,
            std_error: k * se,
        }
    }

    fn axis_entropy(&self, axis: usize) -> Result<f64> {
        let means = self.component_means().map(|m| m[axis]);
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - 14.0;
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 14.0;
        adaptive_simpson(
            |v| {
                let lp = self.marginal_log_density(axis, v);
                -lp.exp() * lp
            },
            lo,
            hi,
            1e-9,
        )
    }

    /// Differential entropy `H(y)` of the full `n_stacks`-dimensional `y`.
    pub fn marginal_entropy(&self) -> Result<f64> {
        Ok(self.n_stacks as f64 * self.axis_entropy(1)?)
    }

    /// Differential entropy `H(x)`.
    pub fn marginal_entropy_x(&self) -> Result<f64> {
        Ok(self.n_stacks as f64 * self.axis_entropy(0)?)
    }

    /// `log p(y_k | x_k)` for one pair, as a mixture of the component
    /// conditionals weighted by the component posteriors given `x_k`.
    pub fn conditional_log_density(&self, x: f64, y: f64) -> f64 {
        let means = self.component_means();
        let log_w: Vec<f64> = means
            .iter()
            .map(|m| MIXING_PROPORTIONS[0].ln() + normal_log_pdf(x, m[0], 1.0))
            .collect();
        let norm = log_sum_exp(log_w.iter().copied());
        let terms = means.iter().zip(&log_w).map(|(&[mx, my], lw)| {
            let cond_mean = my + self.correlation * (x - mx);
            lw - norm + normal_log_pdf(y, cond_mean, self.cov_det())
        });
        log_sum_exp(terms)
    }
}
