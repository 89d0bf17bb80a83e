//! Fixed random affine autoregressive transformations used to hide the
//! particle state inside a higher-dimensional, nonlinearly mixed vector.
//!
//! One layer maps `u` to `v` with `v_i = softplus(a_i(v_{<i})) * u_i + b_i(v_{<i})`.
//! The conditioner for coordinate `i` is a one-hidden-layer network that sees
//! only the already-produced outputs, so the inverse is available in closed
//! form: `u_i = (v_i - b_i(v_{<i})) / softplus(a_i(v_{<i}))`.

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::langevin::ParticleTask;
use crate::nn::tape::softplus;
use crate::nn::{Mlp, MlpSpec};
use crate::rng::{self, Rng};

pub const CONDITIONER_WIDTH: usize = 32;
pub const N_LAYERS: usize = 2;

#[derive(Clone, Debug)]
pub struct AffineAutoregressive {
    dim: usize,
    /// Conditioner `i` reads the full vector with coordinates `>= i` zeroed.
    conditioners: Vec<Mlp>,
}

impl AffineAutoregressive {
    pub fn random(dim: usize, seed: u64) -> Self {
        let conditioners = (0..dim)
            .map(|i| {
                let spec = MlpSpec::new(dim, &[CONDITIONER_WIDTH], 2)
                    .with_seed(rng::derive_seed(seed, i as u64));
                Mlp::init(spec)
            })
            .collect();
        Self { dim, conditioners }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(scale, shift)` for coordinate `i` of every row, given the outputs.
    fn scale_shift(&self, i: usize, outputs: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
        let mut masked = outputs.clone();
        masked.slice_mut(s![.., i..]).fill(0.0);
        let ab = self.conditioners[i].forward(masked.view());
        let scale = ab.column(0).iter().map(|&a| softplus(a)).collect();
        let shift = ab.column(1).to_vec();
        (scale, shift)
    }

    pub fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        assert_eq!(input.ncols(), self.dim, "flow input dimension mismatch");
        let mut out = Array2::zeros(input.raw_dim());
        for i in 0..self.dim {
            let (scale, shift) = self.scale_shift(i, &out);
            for r in 0..input.nrows() {
                out[[r, i]] = scale[r] * input[[r, i]] + shift[r];
            }
        }
        out
    }

    pub fn inverse(&self, output: &Array2<f64>) -> Array2<f64> {
        assert_eq!(output.ncols(), self.dim, "flow input dimension mismatch");
        let mut input = Array2::zeros(output.raw_dim());
        for i in 0..self.dim {
            let (scale, shift) = self.scale_shift(i, output);
            for r in 0..output.nrows() {
                input[[r, i]] = (output[[r, i]] - shift[r]) / scale[r];
            }
        }
        input
    }

    /// Diagonal of the (triangular) Jacobian for every row.
    pub fn jacobian_scales(&self, input: &Array2<f64>) -> Array2<f64> {
        let out = self.forward(input);
        let mut scales = Array2::zeros(input.raw_dim());
        for i in 0..self.dim {
            let (scale, _) = self.scale_shift(i, &out);
            scales.column_mut(i).assign(&ndarray::Array1::from(scale));
        }
        scales
    }
}

/// Two autoregressive layers with the coordinate order reversed between them.
#[derive(Clone, Debug)]
pub struct Augmentation {
    layers: Vec<AffineAutoregressive>,
}

fn reversed(m: &Array2<f64>) -> Array2<f64> {
    m.slice(s![.., ..;-1]).to_owned()
}

impl Augmentation {
    pub fn new(dim: usize, seed: u64) -> Self {
        let layers = (0..N_LAYERS)
            .map(|l| AffineAutoregressive::random(dim, rng::derive_seed(seed, 1_000 + l as u64)))
            .collect();
        Self { layers }
    }

    pub fn for_task(task: &ParticleTask) -> Self {
        Self::new(task.augmented_dim(), task.flow_seed)
    }

    pub fn layers(&self) -> &[AffineAutoregressive] {
        &self.layers
    }

    pub fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut v = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                v = reversed(&v);
            }
            v = layer.forward(&v);
        }
        v
    }

    pub fn inverse(&self, output: &Array2<f64>) -> Array2<f64> {
        let mut v = output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            v = layer.inverse(&v);
            if l > 0 {
                v = reversed(&v);
            }
        }
        v
    }
}

/// Appends unit-normal noise and constant zero columns to a trajectory, giving
/// the pre-flow vector.
pub fn pad_trajectory(traj: &Array2<f64>, task: &ParticleTask, rng: &mut Rng) -> Array2<f64> {
    assert_eq!(traj.ncols(), task.state_dim(), "trajectory width does not match particles");
    let t = traj.nrows();
    let noise = Array2::from_shape_simple_fn((t, task.noise_dims), || rng.sample(StandardNormal));
    let zeros = Array2::zeros((t, task.constant_dims));
    concatenate(Axis(1), &[traj.view(), noise.view(), zeros.view()]).expect("row counts agree")
}

/// Pads and mixes a particle trajectory into the augmented observation series.
pub fn augment_trajectory(traj: &Array2<f64>, task: &ParticleTask, rng: &mut Rng) -> Array2<f64> {
    let padded = pad_trajectory(traj, task, rng);
    Augmentation::for_task(task).forward(&padded)
}
