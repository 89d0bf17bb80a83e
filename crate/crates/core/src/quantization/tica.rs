//! Time-lagged independent component analysis.
//!
//! Finds directions `w` maximizing the lag-`tau` autocorrelation
//! `w' C_tau w / w' C_0 w`: whiten with the instantaneous covariance `C_0`,
//! then diagonalize the symmetrized lagged covariance in the whitened basis.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::eig::symmetric_eig;
use crate::{Error, Result};

/// Relative regularization added to the diagonal of `C_0`.
pub const C0_REGULARIZATION: f64 = 1e-6;
/// Variance below which a dimension counts as constant.
const CONSTANT_VARIANCE: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TicaModel {
    pub mean: Array1<f64>,
    /// Input dimensions that were kept (non-constant), in order.
    pub kept_dims: Vec<usize>,
    /// Dimensions dropped for having zero variance.
    pub dropped_dims: Vec<usize>,
    /// `C_0^{-1/2}` over the kept dimensions.
    pub whitener: Array2<f64>,
    /// Whitened-basis eigenvectors (columns), orthonormal.
    pub components: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    pub lag: usize,
}

impl TicaModel {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Maps input-space rows to TICA coordinates: `(x - mean)[kept] W U`.
    pub fn projection(&self) -> Array2<f64> {
        self.whitener.dot(&self.components)
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let centered = &x - &self.mean;
        let kept = centered.select(Axis(1), &self.kept_dims);
        kept.dot(&self.projection())
    }
}

/// Fits TICA on a `T x d` series, keeping the `r` slowest components.
pub fn tica_fit(series: ArrayView2<'_, f64>, lag: usize, r: usize) -> Result<TicaModel> {
    let (t, d) = series.dim();
    assert!(lag >= 1, "lag must be positive");
    assert!(t > lag + d, "series too short for lag {lag} and dimension {d}");
    let mean = series.mean_axis(Axis(0)).expect("non-empty series");
    let centered = &series - &mean;

    let variances = centered.map_axis(Axis(0), |c| c.dot(&c) / t as f64);
    let (kept_dims, dropped_dims): (Vec<usize>, Vec<usize>) =
        (0..d).partition(|&j| variances[j] > CONSTANT_VARIANCE);
    if kept_dims.is_empty() {
        return Err(Error::RankDeficient {
            null_dims: dropped_dims,
        });
    }
    let x = centered.select(Axis(1), &kept_dims);
    let k = kept_dims.len();
    let r = r.min(k);

    let mut c0 = x.t().dot(&x) / t as f64;
    let trace: f64 = c0.diag().sum();
    let reg = C0_REGULARIZATION * trace / k as f64;
    for i in 0..k {
        c0[[i, i]] += reg;
    }
    let early = x.slice(s![..t - lag, ..]);
    let late = x.slice(s![lag.., ..]);
    let cross = early.t().dot(&late) / (t - lag) as f64;
    let ctau = (&cross + &cross.t()) * 0.5;

    let (c0_vals, c0_vecs) = symmetric_eig(&c0);
    let null: Vec<usize> = c0_vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v > 0.0) || !v.is_finite())
        .map(|(i, _)| {
            let col = c0_vecs.column(i);
            let heaviest = (0..k)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
                .expect("non-empty");
            kept_dims[heaviest]
        })
        .collect();
    if !null.is_empty() {
        return Err(Error::RankDeficient { null_dims: null });
    }
    let inv_sqrt = c0_vals.mapv(|v| 1.0 / v.sqrt());
    let whitener = &c0_vecs * &inv_sqrt;
    let whitened = whitener.t().dot(&ctau).dot(&whitener);
    let symmetric = (&whitened + &whitened.t()) * 0.5;
    let (vals, vecs) = symmetric_eig(&symmetric);

    Ok(TicaModel {
        mean,
        kept_dims,
        dropped_dims,
        whitener,
        components: vecs.slice(s![.., ..r]).to_owned(),
        eigenvalues: vals.slice(s![..r]).to_owned(),
        lag,
    })
}
