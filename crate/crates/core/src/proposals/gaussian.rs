use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::benchmarks::SampleBatch;
use crate::math::{normal_log_pdf, LN_2PI};
use crate::nn::{AdamState, Mlp, MlpSpec, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::rng::Rng;

/// `r(y | x) = N(y; mu(x), diag(exp(log_var(x))))` with one network emitting
/// `[mu | log_var]`; the log-variance is clamped to `[LOG_VAR_MIN, LOG_VAR_MAX]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondGaussian {
    net: Mlp,
    y_dim: usize,
}

/// Per-row Gaussian parameters for a batch of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: Array2<f64>,
    pub log_var: Array2<f64>,
}

impl CondGaussian {
    pub fn new(x_dim: usize, y_dim: usize, hidden: &[usize], seed: u64) -> Self {
        Self {
            net: Mlp::init(MlpSpec::new(x_dim, hidden, 2 * y_dim).with_seed(seed)),
            y_dim,
        }
    }

    pub fn from_net(net: Mlp) -> Self {
        let out = net.spec().output_dim();
        assert!(out % 2 == 0 && out > 0, "network must emit mean and log-variance");
        Self { net, y_dim: out / 2 }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    fn split(&self, out: &Array2<f64>) -> Moments {
        let d = self.y_dim;
        Moments {
            mean: out.slice(s![.., ..d]).to_owned(),
            log_var: out.slice(s![.., d..]).mapv(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX)),
        }
    }

    pub fn moments(&self, x: ArrayView2<'_, f64>) -> Moments {
        self.split(&self.net.forward(x))
    }

    /// `log r(y_r | x_r)` for row-aligned `x` and `y`.
    pub fn log_prob_rows(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Vec<f64> {
        assert_eq!(x.nrows(), y.nrows(), "x and y must be row-aligned");
        assert_eq!(y.ncols(), self.y_dim, "y dimension mismatch");
        let m = self.moments(x);
        (0..x.nrows())
            .map(|r| {
                (0..self.y_dim)
                    .map(|d| normal_log_pdf(y[[r, d]], m.mean[[r, d]], m.log_var[[r, d]].exp()))
                    .sum()
            })
            .collect()
    }

    pub fn log_prob(&self, x: &[f64], y: &[f64]) -> f64 {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let yv = ArrayView2::from_shape((1, y.len()), y).expect("row");
        self.log_prob_rows(xv, yv)[0]
    }

    /// `k` reparameterized draws per row of `x`; row `i*k + j` belongs to `x_i`.
    pub fn sample(&self, x: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
        let m = self.moments(x);
        let mut out = Array2::zeros((x.nrows() * k, self.y_dim));
        for i in 0..x.nrows() {
            for j in 0..k {
                for d in 0..self.y_dim {
                    let eta: f64 = rng.sample(StandardNormal);
                    out[[i * k + j, d]] = m.mean[[i, d]] + (0.5 * m.log_var[[i, d]]).exp() * eta;
                }
            }
        }
        out
    }

    /// Mean negative log-likelihood of the batch and its parameter gradient.
    pub fn nll_and_grad(&self, batch: &SampleBatch) -> (f64, Vec<f64>) {
        let cache = self.net.forward_cached(batch.x.view());
        let out = cache.output();
        let (n, d) = (batch.len(), self.y_dim);
        let mut d_out = Array2::zeros(out.raw_dim());
        let mut nll = 0.0;
        for r in 0..n {
            for c in 0..d {
                let mu = out[[r, c]];
                let raw_lv = out[[r, d + c]];
                let lv = raw_lv.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
                let inv_var = (-lv).exp();
                let diff = batch.y[[r, c]] - mu;
                nll += 0.5 * (LN_2PI + lv + diff * diff * inv_var);
                d_out[[r, c]] = -diff * inv_var / n as f64;
                if (LOG_VAR_MIN..=LOG_VAR_MAX).contains(&raw_lv) {
                    d_out[[r, d + c]] = 0.5 * (1.0 - diff * diff * inv_var) / n as f64;
                }
            }
        }
        (nll / n as f64, self.net.backward(&cache, d_out.view()))
    }

    /// One Adam step on the batch negative log-likelihood; returns the NLL
    /// before the step.
    pub fn train_step(&mut self, batch: &SampleBatch, adam: &mut AdamState) -> f64 {
        let (nll, grads) = self.nll_and_grad(batch);
        adam.step(self.net.params_mut(), &grads);
        nll
    }
}

/// Diagonal Gaussian density over `y`, fitted by maximum likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGaussian {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl DiagonalGaussian {
    pub fn fit(y: ArrayView2<'_, f64>) -> Self {
        assert!(y.nrows() >= 1, "cannot fit an empty sample");
        let mean = y.mean_axis(Axis(0)).expect("non-empty");
        let var = y
            .var_axis(Axis(0), 0.0)
            .mapv(|v| v.max(LOG_VAR_MIN.exp()));
        Self { mean, var }
    }

    pub fn log_prob_rows(&self, y: ArrayView2<'_, f64>) -> Vec<f64> {
        assert_eq!(y.ncols(), self.mean.len(), "y dimension mismatch");
        y.outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(d, &v)| normal_log_pdf(v, self.mean[d], self.var[d]))
                    .sum()
            })
            .collect()
    }
}

/// `mean log r(y|x) + H(y)` with the marginal entropy supplied by an oracle.
pub fn ba_ir_estimate(model: &CondGaussian, batch: &SampleBatch, h_y: f64) -> f64 {
    crate::math::mean(&model.log_prob_rows(batch.x.view(), batch.y.view())) + h_y
}

/// `mean [log r(y|x) - log s(y)]` with a fixed fitted marginal `s`.
pub fn doe_ir_estimate(model: &CondGaussian, marginal: &DiagonalGaussian, batch: &SampleBatch) -> f64 {
    let cond = model.log_prob_rows(batch.x.view(), batch.y.view());
    let marg = marginal.log_prob_rows(batch.y.view());
    cond.iter().zip(&marg).map(|(c, m)| c - m).sum::<f64>() / batch.len() as f64
}
