use serde::{Deserialize, Serialize};

/// Bias-corrected Adam optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

pub const DEFAULT_LEARNING_RATE: f64 = 5e-4;

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self::with_learning_rate(n_params, DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate(n_params: usize, learning_rate: f64) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Applies one descent step to `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
        assert_eq!(
            params.len(),
            self.first_moment.len(),
            "optimizer state sized for a different parameter vector"
        );
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
