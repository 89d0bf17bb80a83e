//! Score-level objectives.
//!
//! Every function here takes the critic scores of the `B` joint pairs and a
//! `B x K` matrix of scores on proposal pairs (row `i` holds the negatives
//! paired with `x_i`). Exponentials see scores clamped to `[-SCORE_CLAMP,
//! SCORE_CLAMP]`; each clamped entry is counted.

use ndarray::{Array2, ArrayView2};

use crate::nn::tape::{sigmoid, softplus};

pub const SCORE_CLAMP: f64 = 50.0;

/// Value, training loss, and loss gradients with respect to the scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreObjective {
    /// The information estimate reported for this batch.
    pub value: f64,
    /// The quantity minimized during training.
    pub loss: f64,
    pub d_joint: Vec<f64>,
    pub d_negatives: Array2<f64>,
    /// Number of scores clamped before exponentiation.
    pub clamped: usize,
}

fn check(joint: &[f64], negatives: ArrayView2<'_, f64>) {
    assert!(!joint.is_empty(), "empty batch");
    assert_eq!(negatives.nrows(), joint.len(), "one row of negatives per joint sample");
    assert!(negatives.ncols() >= 1, "at least one negative per row");
}

/// Clamped score and whether the clamp was active.
fn clamp(s: f64) -> (f64, bool) {
    let c = s.clamp(-SCORE_CLAMP, SCORE_CLAMP);
    (c, c != s)
}

/// `e^{clamp(s)}` for every negative, with the clamp mask and count.
fn exp_negatives(negatives: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<bool>, usize) {
    let mut count = 0;
    let mut mask = Array2::from_elem(negatives.raw_dim(), false);
    let e = Array2::from_shape_fn(negatives.raw_dim(), |ij| {
        let (c, hit) = clamp(negatives[ij]);
        mask[ij] = hit;
        count += hit as usize;
        c.exp()
    });
    (e, mask, count)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Donsker-Varadhan form: `mean(joint) - log mean exp(negatives)`, stabilized
/// by subtracting the maximum clamped score.
pub fn dv_value(joint: &[f64], negatives: ArrayView2<'_, f64>) -> (f64, usize) {
    check(joint, negatives);
    let mut count = 0;
    let clamped: Vec<f64> = negatives
        .iter()
        .map(|&s| {
            let (c, hit) = clamp(s);
            count += hit as usize;
            c
        })
        .collect();
    let m = clamped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lme = m + (clamped.iter().map(|c| (c - m).exp()).sum::<f64>() / clamped.len() as f64).ln();
    (mean(joint) - lme, count)
}

/// `mean(joint) + 1 - mean exp(negatives)`, tight when the proposal-weighted
/// partition function is 1. With `literal` the `+1` is omitted.
pub fn nwj(joint: &[f64], negatives: ArrayView2<'_, f64>, literal: bool) -> ScoreObjective {
    check(joint, negatives);
    let (b, k) = negatives.dim();
    let (e, mask, clamped) = exp_negatives(negatives);
    let offset = if literal { 0.0 } else { 1.0 };
    let value = mean(joint) + offset - e.mean().expect("non-empty");
    let d_negatives = Array2::from_shape_fn((b, k), |ij| {
        if mask[ij] {
            0.0
        } else {
            e[ij] / (b * k) as f64
        }
    });
    ScoreObjective {
        value,
        loss: -value,
        d_joint: vec![-1.0 / b as f64; b],
        d_negatives,
        clamped,
    }
}

/// Exponential moving average of the partition term with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasCorrectedEma {
    decay: f64,
    raw: f64,
    updates: i32,
}

impl BiasCorrectedEma {
    pub fn new(decay: f64) -> Self {
        assert!((0.0..1.0).contains(&decay), "decay must lie in [0, 1)");
        Self {
            decay,
            raw: 0.0,
            updates: 0,
        }
    }

    /// Folds in an observation and returns the corrected average.
    pub fn update(&mut self, observation: f64) -> f64 {
        self.raw = self.decay * self.raw + (1.0 - self.decay) * observation;
        self.updates += 1;
        self.value().expect("just updated")
    }

    pub fn value(&self) -> Option<f64> {
        (self.updates > 0).then(|| self.raw / (1.0 - self.decay.powi(self.updates)))
    }
}

/// Reports the DV value; the loss gradient replaces the batch partition
/// estimate in the denominator by its running average.
pub fn mine(joint: &[f64], negatives: ArrayView2<'_, f64>, ema: &mut BiasCorrectedEma) -> ScoreObjective {
    let (value, _) = dv_value(joint, negatives);
    let (b, k) = negatives.dim();
    let (e, mask, clamped) = exp_negatives(negatives);
    let batch_partition = e.mean().expect("non-empty");
    let denom = ema.update(batch_partition);
    let d_negatives = Array2::from_shape_fn((b, k), |ij| {
        if mask[ij] {
            0.0
        } else {
            e[ij] / ((b * k) as f64 * denom)
        }
    });
    ScoreObjective {
        value,
        loss: -mean(joint) + batch_partition / denom,
        d_joint: vec![-1.0 / b as f64; b],
        d_negatives,
        clamped,
    }
}

/// Contrastive bound where each positive competes with its own `K`
/// negatives: `mean_i [g_ii - log((e^{g_ii} + sum_j e^{g_ij}) / (K + 1))]`.
/// With the other rows of the batch as negatives this is the usual in-batch
/// form, bounded above by `log B`.
pub fn infonce(joint: &[f64], negatives: ArrayView2<'_, f64>) -> ScoreObjective {
    check(joint, negatives);
    let (b, k) = negatives.dim();
    let mut clamped = 0;
    let mut value = 0.0;
    let mut d_joint = vec![0.0; b];
    let mut d_negatives = Array2::zeros((b, k));
    for i in 0..b {
        let (pos, pos_hit) = clamp(joint[i]);
        let row: Vec<(f64, bool)> = negatives.row(i).iter().map(|&s| clamp(s)).collect();
        clamped += pos_hit as usize + row.iter().filter(|r| r.1).count();
        let m = row.iter().map(|r| r.0).fold(pos, f64::max);
        let w_pos = (pos - m).exp();
        let w: Vec<f64> = row.iter().map(|r| (r.0 - m).exp()).collect();
        let total = w_pos + w.iter().sum::<f64>();
        // grouped so that equal scores give exactly zero
        value += (pos - m) - (total.ln() - ((k + 1) as f64).ln());
        // loss = -value / B
        if !pos_hit {
            d_joint[i] = -(1.0 - w_pos / total) / b as f64;
        }
        for j in 0..k {
            if !row[j].1 {
                d_negatives[[i, j]] = w[j] / total / b as f64;
            }
        }
    }
    value /= b as f64;
    ScoreObjective {
        value,
        loss: -value,
        d_joint,
        d_negatives,
        clamped,
    }
}

/// Binary classification loss `mean softplus(-joint) + mean softplus(negatives)`.
/// The reported value is the NWJ value of the same scores.
pub fn js(joint: &[f64], negatives: ArrayView2<'_, f64>, literal: bool) -> ScoreObjective {
    let report = nwj(joint, negatives, literal);
    let (loss, d_joint, d_negatives) = js_loss(joint, negatives);
    ScoreObjective {
        value: report.value,
        loss,
        d_joint,
        d_negatives,
        clamped: report.clamped,
    }
}

pub fn js_loss(joint: &[f64], negatives: ArrayView2<'_, f64>) -> (f64, Vec<f64>, Array2<f64>) {
    check(joint, negatives);
    let (b, k) = negatives.dim();
    let loss = joint.iter().map(|&g| softplus(-g)).sum::<f64>() / b as f64
        + negatives.iter().map(|&g| softplus(g)).sum::<f64>() / (b * k) as f64;
    let d_joint = joint.iter().map(|&g| -sigmoid(-g) / b as f64).collect();
    let d_negatives = negatives.mapv(|g| sigmoid(g) / (b * k) as f64);
    (loss, d_joint, d_negatives)
}

/// `mean(joint) - log mean exp(clip(negatives, -tau, tau))`.
pub fn smile_value(joint: &[f64], negatives: ArrayView2<'_, f64>, tau: f64) -> (f64, usize) {
    assert!(tau > 0.0, "tau must be positive");
    dv_value(joint, negatives.mapv(|s| s.clamp(-tau, tau)).view())
}

/// Trained with the classification loss, reported with the clipped DV value.
pub fn smile(joint: &[f64], negatives: ArrayView2<'_, f64>, tau: f64) -> ScoreObjective {
    let (value, clamped) = smile_value(joint, negatives, tau);
    let (loss, d_joint, d_negatives) = js_loss(joint, negatives);
    ScoreObjective {
        value,
        loss,
        d_joint,
        d_negatives,
        clamped,
    }
}

/// Baseline interpolating between NWJ (`alpha = 1`) and the per-row
/// contrastive normalizer (`alpha = 0`):
/// `mean_i [g_ii - log b_i - a_i / b_i] + 1` with `a_i = mean_j e^{g_ij}` and
/// `b_i = alpha + (1 - alpha) a_i`.
pub fn interpolated(joint: &[f64], negatives: ArrayView2<'_, f64>, alpha: f64) -> ScoreObjective {
    check(joint, negatives);
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
    let (b, k) = negatives.dim();
    let (e, mask, clamped) = exp_negatives(negatives);
    let mut value = 0.0;
    let mut d_negatives = Array2::zeros((b, k));
    for i in 0..b {
        let a = e.row(i).sum() / k as f64;
        let base = alpha + (1.0 - alpha) * a;
        value += joint[i] - base.ln() - a / base;
        // d(-value)/d a_i, then chain through a_i = mean_j e^{g_ij}
        let d_a = ((1.0 - alpha) / base + alpha / (base * base)) / b as f64;
        for j in 0..k {
            if !mask[[i, j]] {
                d_negatives[[i, j]] = d_a * e[[i, j]] / k as f64;
            }
        }
    }
    let value = value / b as f64 + 1.0;
    ScoreObjective {
        value,
        loss: -value,
        d_joint: vec![-1.0 / b as f64; b],
        d_negatives,
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn constant(b: usize, k: usize, c: f64) -> (Vec<f64>, Array2<f64>) {
        (vec![c; b], Array2::from_elem((b, k), c))
    }

    #[test]
    fn constant_scores() {
        let (j, n) = constant(8, 7, 0.0);
        assert_eq!(dv_value(&j, n.view()).0, 0.0);
        assert_eq!(nwj(&j, n.view(), false).value, 0.0);
        assert_eq!(nwj(&j, n.view(), true).value, -1.0);
        assert_eq!(infonce(&j, n.view()).value, 0.0);
        assert_eq!(smile_value(&j, n.view(), 5.0).0, 0.0);
        assert_eq!(interpolated(&j, n.view(), 0.5).value, 0.0);
        let (loss, _, _) = js_loss(&j, n.view());
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-15);
        for c in [-3.0, 0.5, 2.0] {
            let (j, n) = constant(4, 3, c);
            assert!(dv_value(&j, n.view()).0.abs() < 1e-12);
            let v = nwj(&j, n.view(), false).value;
            assert!((v - (c + 1.0 - f64::exp(c))).abs() < 1e-12);
            assert!(v <= 0.0);
        }
    }

    #[test]
    fn smile_clips_only_the_partition() {
        let (j, n) = constant(3, 2, 7.0);
        assert!((smile_value(&j, n.view(), 5.0).0 - 2.0).abs() < 1e-12);
        let n = array![[0.3, -1.2], [2.0, 0.1]];
        let j = [1.0, 0.5];
        let mine_like = dv_value(&j, n.view()).0;
        assert_eq!(smile_value(&j, n.view(), 1e9).0, mine_like);
    }

    #[test]
    fn two_by_two_contrastive_limit() {
        for s in [10.0, 30.0] {
            let v = infonce(&[s, s], array![[0.0], [0.0]].view()).value;
            assert!((v - 2f64.ln()).abs() < 1e-4);
        }
    }

    #[test]
    fn ema_two_step_recursion() {
        let mut ema = BiasCorrectedEma::new(0.99);
        ema.update(2.0);
        let v = ema.update(5.0);
        let expected = (0.99 * 0.01 * 2.0 + 0.01 * 5.0) / (1.0 - 0.99f64.powi(2));
        assert!((v - expected).abs() < 1e-12);
        assert!((BiasCorrectedEma::new(0.99).update(3.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_counter_and_finiteness() {
        let j = [60.0, -60.0];
        let n = array![[55.0, 0.0], [-70.0, 49.0]];
        let o = nwj(&j, n.view(), false);
        assert_eq!(o.clamped, 2);
        assert!(o.value.is_finite());
        assert_eq!(o.d_negatives[[0, 0]], 0.0);
        assert!(infonce(&j, n.view()).value.is_finite());
        assert!(interpolated(&j, n.view(), 0.5).value.is_finite());
        assert!(dv_value(&j, n.view()).0.is_finite());
    }

    #[test]
    fn shift_changes_nwj_but_not_dv() {
        let j = [0.4, 1.1, -0.3];
        let n = array![[0.2, -0.5], [1.3, 0.0], [-0.8, 0.6]];
        let shifted_n = n.mapv(|v| v + 0.7);
        let shifted_j: Vec<f64> = j.iter().map(|v| v + 0.7).collect();
        let dv = dv_value(&j, n.view()).0;
        assert!((dv_value(&shifted_j, shifted_n.view()).0 - dv).abs() < 1e-12);
        assert_ne!(nwj(&shifted_j, shifted_n.view(), false).value, nwj(&j, n.view(), false).value);
    }

    fn check_gradients(f: impl Fn(&[f64], ArrayView2<'_, f64>) -> ScoreObjective) {
        let j = vec![0.4, 1.1, -0.3];
        let n = array![[0.2, -0.5], [1.3, 0.0], [-0.8, 0.6]];
        let base = f(&j, n.view());
        let h = 1e-6;
        for i in 0..j.len() {
            let mut jp = j.clone();
            jp[i] += h;
            let mut jm = j.clone();
            jm[i] -= h;
            let fd = (f(&jp, n.view()).loss - f(&jm, n.view()).loss) / (2.0 * h);
            assert!((fd - base.d_joint[i]).abs() < 1e-7, "joint {i}: {fd} vs {}", base.d_joint[i]);
        }
        for idx in ndarray::indices(n.dim()) {
            let mut np = n.clone();
            np[idx] += h;
            let mut nm = n.clone();
            nm[idx] -= h;
            let fd = (f(&j, np.view()).loss - f(&j, nm.view()).loss) / (2.0 * h);
            assert!((fd - base.d_negatives[idx]).abs() < 1e-7, "negative {idx:?}");
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        check_gradients(|j, n| nwj(j, n, false));
        check_gradients(infonce);
        check_gradients(|j, n| js(j, n, false));
        check_gradients(|j, n| smile(j, n, 5.0));
        for alpha in [0.0, 0.5, 1.0] {
            check_gradients(|j, n| interpolated(j, n, alpha));
        }
    }

    #[test]
    fn mine_gradient_uses_running_denominator() {
        let j = [0.4, 1.1];
        let n = array![[0.2, -0.5], [1.3, 0.0]];
        let mut ema = BiasCorrectedEma::new(0.99);
        ema.update(10.0);
        let o = mine(&j, n.view(), &mut ema);
        let denom = ema.value().unwrap();
        assert!((o.d_negatives[[1, 0]] - 1.3f64.exp() / (4.0 * denom)).abs() < 1e-15);
        assert_eq!(o.value, dv_value(&j, n.view()).0);
    }

    #[test]
    fn interpolation_endpoints() {
        let j = [0.4, 1.1, -0.3];
        let n = array![[0.2, -0.5], [1.3, 0.0], [-0.8, 0.6]];
        let at_one = interpolated(&j, n.view(), 1.0).value;
        assert!((at_one - nwj(&j, n.view(), false).value).abs() < 1e-12);
        // alpha = 0 with the positive included among the candidates
        let full = array![[0.4, 0.2, -0.5], [1.1, 1.3, 0.0], [-0.3, -0.8, 0.6]];
        let at_zero = interpolated(&j, full.view(), 0.0).value;
        assert!((at_zero - infonce(&j, n.view()).value).abs() < 1e-9);
    }
}
