//! Ground-truth benchmark tasks: the stacked correlated-normal mixture and the
//! Langevin multi-particle series, each paired with an information oracle.

mod batch;
pub mod discrete;
pub mod flow;
pub mod io;
pub mod langevin;
pub mod mixture;
pub mod quadrature;

pub use batch::SampleBatch;
pub use discrete::DiscreteJoint;
pub use flow::{augment_trajectory, Augmentation};
pub use langevin::{Landscape, ParticleOracle, ParticleTask};
pub use mixture::{GaussianMixtureTask, LogDensities, OracleEstimate};

use ndarray::s;

/// Consecutive-state pairs `(s_t, s_{t+1})` of a series.
pub fn lagged_pairs(series: &ndarray::Array2<f64>, lag: usize) -> SampleBatch {
    assert!(series.nrows() > lag, "series shorter than the lag");
    let t = series.nrows();
    SampleBatch::new(
        series.slice(s![..t - lag, ..]).to_owned(),
        series.slice(s![lag.., ..]).to_owned(),
    )
}
