//! Discrete-time overdamped Langevin particles on a fixed 2-D energy landscape.
//!
//! Each particle follows `x_t = x_{t-1} - eps * grad U(x_{t-1}) + sqrt(2 eps / beta) * eta`
//! with `eta ~ N(0, I)`. The transition kernel is Gaussian with a known
//! covariance, so `H(x_{t+1} | x_t)` is analytic; the stationary marginal
//! entropy is estimated by binning a long equilibrium chain.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::{gaussian_entropy, log_sum_exp, mean_and_std_error};
use crate::quantization::discrete_entropy;
use crate::rng::{self, Rng};
use crate::{Error, Result};

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Landscape {
    /// `U(x) = -log sum_c w_c N(x; m_c, sigma^2 I)`.
    GaussianWells {
        means: Vec<[f64; 2]>,
        weights: Vec<f64>,
        sigma: f64,
    },
    /// `U(x) = stiffness * |x|^2 / 2`.
    Quadratic { stiffness: f64 },
}

impl Default for Landscape {
    /// Four equal wells at `(+-2, +-2)` with width 0.8.
    fn default() -> Self {
        Landscape::GaussianWells {
            means: vec![[2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]],
            weights: vec![0.25; 4],
            sigma: 0.8,
        }
    }
}

impl Landscape {
    pub fn energy(&self, p: [f64; 2]) -> f64 {
        match self {
            Landscape::GaussianWells {
                means,
                weights,
                sigma,
            } => {
                let var = sigma * sigma;
                let terms = means.iter().zip(weights).map(|(m, w)| {
                    let d2 = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
                    w.ln() - (2.0 * std::f64::consts::PI * var).ln() - 0.5 * d2 / var
                });
                -log_sum_exp(terms)
            }
            Landscape::Quadratic { stiffness } => 0.5 * stiffness * (p[0] * p[0] + p[1] * p[1]),
        }
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        match self {
            Landscape::GaussianWells {
                means,
                weights,
                sigma,
            } => {
                let var = sigma * sigma;
                let log_r: Vec<f64> = means
                    .iter()
                    .zip(weights)
                    .map(|(m, w)| {
                        let d2 = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
                        w.ln() - 0.5 * d2 / var
                    })
                    .collect();
                let norm = log_sum_exp(log_r.iter().copied());
                let mut g = [0.0; 2];
                for (m, lr) in means.iter().zip(&log_r) {
                    let r = (lr - norm).exp();
                    g[0] += r * (p[0] - m[0]) / var;
                    g[1] += r * (p[1] - m[1]) / var;
                }
                g
            }
            Landscape::Quadratic { stiffness } => [stiffness * p[0], stiffness * p[1]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleTask {
    pub landscape: Landscape,
    pub eps_lang: f64,
    /// Inverse temperature; `f64::INFINITY` switches the noise off.
    pub beta: f64,
    pub n_particles: usize,
    pub trajectory_length: usize,
    pub burn_in: usize,
    pub noise_dims: usize,
    pub constant_dims: usize,
    pub flow_seed: u64,
    pub initial_position: [f64; 2],
    /// Chain length used for the binned marginal entropy of each particle.
    pub entropy_samples: usize,
    pub entropy_bins: usize,
}

impl Default for ParticleTask {
    fn default() -> Self {
        Self {
            landscape: Landscape::default(),
            eps_lang: 0.05,
            beta: 0.3,
            n_particles: 5,
            trajectory_length: 100_000,
            burn_in: 100_000,
            noise_dims: 10,
            constant_dims: 10,
            flow_seed: 0,
            initial_position: [0.0, 0.0],
            entropy_samples: 2_000_000,
            entropy_bins: 100,
        }
    }
}

/// Ground truth for the particle task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleOracle {
    /// Total `I(x_t; x_{t+1})` over all particles.
    pub total: f64,
    pub std_error: f64,
    pub per_particle: Vec<f64>,
    pub marginal_entropies: Vec<f64>,
    /// Per-particle `H(x_{t+1} | x_t)`.
    pub conditional_entropy: f64,
}

impl ParticleTask {
    /// Per-dimension standard deviation of the transition noise.
    pub fn noise_std(&self) -> f64 {
        (2.0 * self.eps_lang / self.beta).sqrt()
    }

    /// Analytic `H(x_{t+1} | x_t)` of one 2-D particle.
    pub fn conditional_entropy(&self) -> f64 {
        let s = self.noise_std();
        gaussian_entropy(2, s * s)
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_particles
    }

    pub fn augmented_dim(&self) -> usize {
        self.state_dim() + self.noise_dims + self.constant_dims
    }

    /// One particle: burn-in from the fixed initial position, then `n` samples.
    pub fn simulate_particle(&self, n: usize, rng: &mut Rng) -> Result<Vec<[f64; 2]>> {
        assert!(n > 0 && self.burn_in > 0, "burn-in and length must be positive");
        let s = self.noise_std();
        let mut p = self.initial_position;
        let mut out = Vec::with_capacity(n);
        for step in 0..self.burn_in + n {
            let g = self.landscape.gradient(p);
            for d in 0..2 {
                let eta: f64 = if s > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                p[d] = p[d] - self.eps_lang * g[d] + s * eta;
            }
            let magnitude = p[0].hypot(p[1]);
            if !magnitude.is_finite() || magnitude > DIVERGENCE_LIMIT {
                return Err(Error::Divergence { step, magnitude });
            }
            if step >= self.burn_in {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Post-burn-in trajectory of all particles: `T x (2 n_particles)`, with
    /// particle `k` in columns `2k, 2k+1`. Particles use independent streams.
    pub fn simulate(&self, rng: &mut Rng) -> Result<Array2<f64>> {
        let base: u64 = rng.random();
        let t = self.trajectory_length;
        let mut traj = Array2::zeros((t, self.state_dim()));
        for k in 0..self.n_particles {
            let mut stream = rng::stream(base, k as u64);
            let path = self.simulate_particle(t, &mut stream)?;
            for (i, p) in path.iter().enumerate() {
                traj[[i, 2 * k]] = p[0];
                traj[[i, 2 * k + 1]] = p[1];
            }
        }
        Ok(traj)
    }

    /// Mutual information between consecutive states. Every particle gets its
    /// own equilibrium chain of `entropy_samples` steps; the marginal entropy
    /// is binned on an `entropy_bins x entropy_bins` grid and the analytic
    /// conditional entropy is subtracted.
    pub fn ground_truth_mi(&self, rng: &mut Rng) -> Result<ParticleOracle> {
        let base: u64 = rng.random();
        let h_cond = self.conditional_entropy();
        let mut marginal_entropies = Vec::with_capacity(self.n_particles);
        for k in 0..self.n_particles {
            let mut stream = rng::stream(base, k as u64);
            let chain = self.simulate_particle(self.entropy_samples, &mut stream)?;
            marginal_entropies.push(binned_entropy_2d(&chain, self.entropy_bins));
        }
        let per_particle: Vec<f64> = marginal_entropies.iter().map(|h| h - h_cond).collect();
        let n = per_particle.len() as f64;
        let std_error = if per_particle.len() > 1 {
            n * mean_and_std_error(&per_particle).1
        } else {
            0.0
        };
        Ok(ParticleOracle {
            total: per_particle.iter().sum(),
            std_error,
            per_particle,
            marginal_entropies,
            conditional_entropy: h_cond,
        })
    }
}

/// Bin edges covering `values`: the `[min, max]` range widened by 1%.
pub fn bin_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let pad = 0.005 * (hi - lo).max(f64::MIN_POSITIVE);
    (lo - pad, hi + pad)
}

fn bin_index(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width) as usize).min(bins - 1)
}

/// Counts of 2-D samples on a `bins x bins` grid over their bounding box.
/// Returns the counts (row-major) and the area of one cell.
pub fn histogram_2d(samples: &[[f64; 2]], bins: usize) -> (Vec<u64>, [(f64, f64); 2], f64) {
    assert!(!samples.is_empty(), "cannot bin an empty sample");
    let rx = bin_range(samples.iter().map(|p| p[0]));
    let ry = bin_range(samples.iter().map(|p| p[1]));
    let wx = (rx.1 - rx.0) / bins as f64;
    let wy = (ry.1 - ry.0) / bins as f64;
    let mut counts = vec![0u64; bins * bins];
    for p in samples {
        let i = bin_index(p[0], rx.0, wx, bins);
        let j = bin_index(p[1], ry.0, wy, bins);
        counts[i * bins + j] += 1;
    }
    (counts, [rx, ry], wx * wy)
}

/// Differential entropy estimate from a 2-D histogram: plug-in entropy of the
/// cell frequencies plus the log cell area.
pub fn binned_entropy_2d(samples: &[[f64; 2]], bins: usize) -> f64 {
    let (counts, _, area) = histogram_2d(samples, bins);
    discrete_entropy(&counts) + area.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn quadratic_task() -> ParticleTask {
        ParticleTask {
            landscape: Landscape::Quadratic { stiffness: 1.0 },
            n_particles: 1,
            burn_in: 1_000,
            ..Default::default()
        }
    }

    #[test]
    fn conditional_entropy_closed_form() {
        let task = ParticleTask::default();
        let expected = (2.0 * std::f64::consts::PI * std::f64::consts::E / 3.0).ln();
        assert!((task.conditional_entropy() - expected).abs() < 1e-12);
        assert!((task.noise_std() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn noiseless_particle_stays_at_minimum() {
        let task = ParticleTask {
            beta: f64::INFINITY,
            initial_position: [0.0, 0.0],
            ..quadratic_task()
        };
        let path = task.simulate_particle(100, &mut rng_from_seed(0)).unwrap();
        assert!(path.iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn noiseless_particle_settles_in_a_well() {
        let task = ParticleTask {
            beta: f64::INFINITY,
            initial_position: [1.5, 1.7],
            burn_in: 5_000,
            n_particles: 1,
            ..Default::default()
        };
        let path = task.simulate_particle(10, &mut rng_from_seed(0)).unwrap();
        let last = path[9];
        let g = task.landscape.gradient(last);
        assert!(g[0].abs() < 1e-9 && g[1].abs() < 1e-9);
        assert!(path.windows(2).all(|w| (w[0][0] - w[1][0]).abs() < 1e-9));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = Landscape::default();
        for p in [[0.3, -1.2], [2.5, 2.1], [-4.0, 0.0]] {
            let g = l.gradient(p);
            let h = 1e-6;
            for d in 0..2 {
                let mut a = p;
                let mut b = p;
                a[d] += h;
                b[d] -= h;
                let fd = (l.energy(a) - l.energy(b)) / (2.0 * h);
                assert!((fd - g[d]).abs() < 1e-6, "{fd} vs {}", g[d]);
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let task = ParticleTask {
            landscape: Landscape::Quadratic { stiffness: -50.0 },
            initial_position: [1.0, 0.0],
            ..quadratic_task()
        };
        match task.simulate_particle(10, &mut rng_from_seed(0)) {
            Err(Error::Divergence { step, .. }) => assert!(step < 1_000),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_well_matches_discrete_ou_variance() {
        let task = quadratic_task();
        let eps = task.eps_lang;
        let expected = (2.0 * eps / task.beta) / (2.0 * eps - eps * eps);
        let path = task.simulate_particle(400_000, &mut rng_from_seed(9)).unwrap();
        for d in 0..2 {
            let v = crate::math::variance(&path.iter().map(|p| p[d]).collect::<Vec<_>>());
            assert!((v / expected - 1.0).abs() < 0.02, "variance {v} vs {expected}");
        }
    }

    #[test]
    fn binned_entropy_of_uniform_square() {
        let mut rng = rng_from_seed(2);
        let samples: Vec<[f64; 2]> = (0..400_000)
            .map(|_| [rng.random_range(0.0..2.0), rng.random_range(0.0..3.0)])
            .collect();
        // the padded bounding box leaves the edge cells partly empty, which
        // inflates a uniform density's estimate by about 0.02 nats
        let h = binned_entropy_2d(&samples, 20);
        assert!((h - 6f64.ln()).abs() < 0.03, "{h}");
    }
}
