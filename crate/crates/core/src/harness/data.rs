use std::fs;
use std::path::Path;

use ndarray::{concatenate, s, Axis};
use serde::{Deserialize, Serialize};

use super::config::TaskConfig;
use crate::benchmarks::io::{read_json, read_matrix, sidecar_path, write_json, write_matrix};
use crate::benchmarks::{augment_trajectory, lagged_pairs, SampleBatch};
use crate::rng::stream;
use crate::{Error, Result};

const DATA_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;

/// File name of the pair matrix written by [`write_dataset`].
pub const PAIRS_FILE: &str = "pairs.bin";

/// Ground truth of a task configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub mi: f64,
    pub std_error: f64,
    /// `H(x)` where it is analytic or binned.
    pub h_x: Option<f64>,
    /// `H(y)`; only available where the observation has a density.
    pub h_y: Option<f64>,
    /// `H(y | x)` summed over stacks or particles.
    pub conditional_entropy: Option<f64>,
    /// Information of each stack or particle.
    pub per_unit: Vec<f64>,
}

pub fn compute_oracle(task: &TaskConfig, samples: usize, seed: u64) -> Result<Oracle> {
    let mut rng = stream(seed, ORACLE_STREAM);
    match task {
        TaskConfig::GaussianMixture(t) => {
            let est = t.true_mi(samples, &mut rng);
            let h_y = t.marginal_entropy()?;
            Ok(Oracle {
                mi: est.estimate,
                std_error: est.std_error,
                h_x: Some(t.marginal_entropy_x()?),
                h_y: Some(h_y),
                conditional_entropy: Some(h_y - est.estimate),
                per_unit: vec![est.estimate / t.n_stacks as f64; t.n_stacks],
            })
        }
        TaskConfig::Particles(t) => {
            let o = t.ground_truth_mi(&mut rng)?;
            Ok(Oracle {
                mi: o.total,
                std_error: o.std_error,
                h_x: Some(o.marginal_entropies.iter().sum()),
                h_y: None,
                conditional_entropy: Some(o.conditional_entropy * t.n_particles as f64),
                per_unit: o.per_particle,
            })
        }
    }
}

/// The `(x, y)` training pairs of a task for one seed: i.i.d. mixture draws,
/// or consecutive states of the augmented particle series.
pub fn generate_pairs(task: &TaskConfig, seed: u64) -> Result<SampleBatch> {
    let mut rng = stream(seed, DATA_STREAM);
    match task {
        TaskConfig::GaussianMixture(t) => Ok(t.sample(t.dataset_size, &mut rng)),
        TaskConfig::Particles(t) => {
            let traj = t.simulate(&mut rng)?;
            let observed = augment_trajectory(&traj, t, &mut rng);
            Ok(lagged_pairs(&observed, 1))
        }
    }
}

/// Sidecar metadata of a stored dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub task: TaskConfig,
    pub seed: u64,
    pub rows: usize,
    pub x_dim: usize,
    pub y_dim: usize,
    pub oracle: Oracle,
}

/// Writes `[x | y]` to `dir/pairs.bin` with a JSON sidecar.
pub fn write_dataset(dir: impl AsRef<Path>, pairs: &SampleBatch, meta: &DatasetMeta) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let joined = concatenate(Axis(1), &[pairs.x.view(), pairs.y.view()]).expect("row-aligned");
    let path = dir.join(PAIRS_FILE);
    write_matrix(&path, &joined)?;
    write_json(sidecar_path(&path), meta)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(SampleBatch, DatasetMeta)> {
    let path = dir.as_ref().join(PAIRS_FILE);
    let meta: DatasetMeta = read_json(sidecar_path(&path))?;
    let joined = read_matrix(&path)?;
    if joined.nrows() != meta.rows || joined.ncols() != meta.x_dim + meta.y_dim {
        return Err(Error::Format {
            path,
            reason: format!(
                "matrix is {}x{}, sidecar promises {}x{}",
                joined.nrows(),
                joined.ncols(),
                meta.rows,
                meta.x_dim + meta.y_dim
            ),
        });
    }
    let x = joined.slice(s![.., ..meta.x_dim]).to_owned();
    let y = joined.slice(s![.., meta.x_dim..]).to_owned();
    Ok((SampleBatch::new(x, y), meta))
}
