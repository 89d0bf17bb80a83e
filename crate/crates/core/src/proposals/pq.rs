use ndarray::{Array2, ArrayView2};

use crate::benchmarks::SampleBatch;
use crate::nn::{AdamState, Mlp, MlpSpec};

/// Hidden width of the code classifier.
pub const CLASSIFIER_HIDDEN: usize = 128;

/// Anything that yields `log s(code | y)` for every code.
pub trait CodeClassifier {
    fn n_codes(&self) -> usize;

    /// Row-wise log-probabilities over codes, `n x n_codes`.
    fn log_probs(&self, y: ArrayView2<'_, f64>) -> Array2<f64>;
}

fn log_softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
}

/// `s(code | y)`: a one-hidden-layer network followed by a softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct PqClassifier {
    net: Mlp,
}

impl PqClassifier {
    pub fn new(y_dim: usize, n_codes: usize, seed: u64) -> Self {
        Self::from_net(Mlp::init(MlpSpec::new(y_dim, &[CLASSIFIER_HIDDEN], n_codes).with_seed(seed)))
    }

    pub fn from_net(net: Mlp) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    pub fn log_prob(&self, code: usize, y: &[f64]) -> f64 {
        assert!(code < self.n_codes(), "code {code} out of range for {} codes", self.n_codes());
        let yv = ArrayView2::from_shape((1, y.len()), y).expect("row");
        self.log_probs(yv)[[0, code]]
    }

    /// Mean cross-entropy of the batch codes and its parameter gradient.
    pub fn nll_and_grad(&self, batch: &SampleBatch) -> (f64, Vec<f64>) {
        let codes = batch.codes.as_ref().expect("classifier training needs coded batches");
        let cache = self.net.forward_cached(batch.y.view());
        let mut lp = cache.output().clone();
        log_softmax_rows(&mut lp);
        let n = batch.len() as f64;
        let mut nll = 0.0;
        let mut d_out = lp.mapv(f64::exp);
        for (r, &c) in codes.iter().enumerate() {
            assert!(c < self.n_codes(), "code {c} out of range");
            nll -= lp[[r, c]];
            d_out[[r, c]] -= 1.0;
        }
        d_out /= n;
        (nll / n, self.net.backward(&cache, d_out.view()))
    }

    pub fn train_step(&mut self, batch: &SampleBatch, adam: &mut AdamState) -> f64 {
        let (nll, grads) = self.nll_and_grad(batch);
        adam.step(self.net.params_mut(), &grads);
        nll
    }
}

impl CodeClassifier for PqClassifier {
    fn n_codes(&self) -> usize {
        self.net.spec().output_dim()
    }

    fn log_probs(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = self.net.forward(y);
        log_softmax_rows(&mut out);
        out
    }
}

/// `mean_i log s(code_i | y_i) + H(code)`, a lower bound on `I(Q(x); y)`.
pub fn pq_ir_estimate(classifier: &impl CodeClassifier, batch: &SampleBatch, code_entropy: f64) -> f64 {
    let codes = batch.codes.as_ref().expect("batch carries no codes");
    let lp = classifier.log_probs(batch.y.view());
    let total: f64 = codes
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            assert!(c < classifier.n_codes(), "code {c} out of range");
            lp[[r, c]]
        })
        .sum();
    total / batch.len() as f64 + code_entropy
}
