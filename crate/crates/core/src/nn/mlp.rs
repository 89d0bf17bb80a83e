use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tape::{sigmoid, softplus, ParamTape, Var};
use crate::rng;

/// Bounds on the log-variance fed to [`Activation::ExpHalf`], so that the
/// represented variance stays in `[e^-10, e^10]`.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Softplus,
    Identity,
    /// `exp(z / 2)` with `z` clamped to the log-variance range: maps a
    /// log-variance to a standard deviation.
    ExpHalf,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
            Activation::Identity => z,
            Activation::ExpHalf => (0.5 * z.clamp(LOG_VAR_MIN, LOG_VAR_MAX)).exp(),
        }
    }

    /// Derivative with respect to the pre-activation `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
            Activation::ExpHalf => {
                if (LOG_VAR_MIN..=LOG_VAR_MAX).contains(&z) {
                    0.5 * a
                } else {
                    0.0
                }
            }
        }
    }

    pub fn on_tape(self, tape: &mut ParamTape, z: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(z),
            Activation::Softplus => tape.softplus(z),
            Activation::Identity => z,
            Activation::ExpHalf => {
                let zv = tape.value(z);
                if (LOG_VAR_MIN..=LOG_VAR_MAX).contains(&zv) {
                    let half = tape.scale(z, 0.5);
                    tape.exp(half)
                } else {
                    tape.constant(self.apply(zv))
                }
            }
        }
    }
}

/// Architecture of a fully connected network.
///
/// `widths` lists every layer including input and output, e.g. `[10, 256,
/// 128, 1]`. Identical specs (seed included) initialize to bit-identical
/// parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub seed: u64,
}

/// Hidden widths used for critics and conditional proposals.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 128];

impl MlpSpec {
    /// ReLU hidden layers and an identity output layer.
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        assert!(widths.iter().all(|&w| w > 0), "layer widths must be positive");
        Self {
            widths,
            hidden: Activation::Relu,
            output: Activation::Identity,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hidden_activation(mut self, act: Activation) -> Self {
        self.hidden = act;
        self
    }

    pub fn with_output_activation(mut self, act: Activation) -> Self {
        self.output = act;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Offsets of (weights, bias) of each layer in the flat parameter vector.
    fn layout(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let weights = off;
                let bias = off + w[0] * w[1];
                off = bias + w[1];
                (weights, bias)
            })
            .collect()
    }
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// A multilayer perceptron with a flat parameter vector.
///
/// Each layer stores an `out x in` row-major weight matrix followed by its
/// bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for
    /// weights and biases, drawn from the spec's seed.
    pub fn init(spec: MlpSpec) -> Self {
        let mut rng = rng::rng_from_seed(spec.seed);
        let mut params = Vec::with_capacity(spec.n_params());
        for w in spec.widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { spec, params }
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let n = spec.n_params();
        Self {
            spec,
            params: vec![0.0; n],
        }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), spec.n_params(), "parameter count mismatch");
        Self { spec, params }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn weights(&self, layer: usize, offsets: (usize, usize)) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = (self.spec.widths[layer], self.spec.widths[layer + 1]);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[offsets.0..offsets.1])
            .expect("layout matches widths");
        let b = ArrayView1::from(&self.params[offsets.1..offsets.1 + fan_out]);
        (w, b)
    }

    /// Batched forward pass; rows of `input` are independent examples.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        self.check_input(input.ncols());
        let mut a = input.to_owned();
        for (layer, offsets) in self.spec.layout().into_iter().enumerate() {
            let (w, b) = self.weights(layer, offsets);
            let mut z = a.dot(&w.t());
            z += &b;
            let act = self.spec.activation(layer);
            z.mapv_inplace(|v| act.apply(v));
            a = z;
        }
        a
    }

    pub fn forward_cached(&self, input: ArrayView2<'_, f64>) -> ForwardCache {
        self.check_input(input.ncols());
        let n_layers = self.spec.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut a = input.to_owned();
        for (layer, offsets) in self.spec.layout().into_iter().enumerate() {
            let (w, b) = self.weights(layer, offsets);
            let mut z = a.dot(&w.t());
            z += &b;
            let act = self.spec.activation(layer);
            let next = z.mapv(|v| act.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        ForwardCache {
            inputs,
            pre,
            output: a,
        }
    }

    /// Gradient of `sum(d_output * output)` with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache, d_output: ArrayView2<'_, f64>) -> Vec<f64> {
        self.backward_impl(cache, d_output, false).0
    }

    /// Like [`Mlp::backward`], also returning the gradient with respect to the
    /// network input.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        d_output: ArrayView2<'_, f64>,
    ) -> (Vec<f64>, Array2<f64>) {
        let (g, d_in) = self.backward_impl(cache, d_output, true);
        (g, d_in.expect("requested"))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        d_output: ArrayView2<'_, f64>,
        want_input: bool,
    ) -> (Vec<f64>, Option<Array2<f64>>) {
        assert_eq!(
            d_output.dim(),
            cache.output.dim(),
            "upstream gradient shape does not match network output"
        );
        let mut grads = vec![0.0; self.params.len()];
        let layout = self.spec.layout();
        let mut upstream = d_output.to_owned();
        for layer in (0..self.spec.n_layers()).rev() {
            let act = self.spec.activation(layer);
            let z = &cache.pre[layer];
            let a_out = if layer + 1 == self.spec.n_layers() {
                &cache.output
            } else {
                &cache.inputs[layer + 1]
            };
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(a_out)
                .for_each(|d, &zv, &av| *d *= act.derivative(zv, av));
            let (w_off, b_off) = layout[layer];
            let fan_out = self.spec.widths[layer + 1];
            let dw = dz.t().dot(&cache.inputs[layer]);
            for (g, v) in grads[w_off..b_off].iter_mut().zip(dw.iter()) {
                *g = *v;
            }
            let db = dz.sum_axis(Axis(0));
            for (g, v) in grads[b_off..b_off + fan_out].iter_mut().zip(db.iter()) {
                *g = *v;
            }
            if layer > 0 || want_input {
                let (w, _) = self.weights(layer, layout[layer]);
                upstream = dz.dot(&w);
            } else {
                upstream = Array2::zeros((0, 0));
            }
        }
        (grads, want_input.then_some(upstream))
    }

    /// Single-example forward pass.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        self.forward(view).into_raw_vec_and_offset().0
    }

    /// Records the forward pass of one example on `tape`, with `params` the
    /// tape variables standing for this network's parameters.
    pub fn apply_on_tape(&self, tape: &mut ParamTape, params: &[Var], input: &[Var]) -> Vec<Var> {
        assert_eq!(params.len(), self.params.len(), "parameter count mismatch");
        self.check_input(input.len());
        let mut a = input.to_vec();
        for (layer, (w_off, b_off)) in self.spec.layout().into_iter().enumerate() {
            let (fan_in, fan_out) = (self.spec.widths[layer], self.spec.widths[layer + 1]);
            let act = self.spec.activation(layer);
            let next: Vec<Var> = (0..fan_out)
                .map(|o| {
                    let row = &params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    let dot = tape.dot(row, &a);
                    let z = tape.add(dot, params[b_off + o]);
                    act.on_tape(tape, z)
                })
                .collect();
            a = next;
        }
        a
    }

    fn check_input(&self, got: usize) {
        assert_eq!(
            got,
            self.spec.input_dim(),
            "input dimension {got} does not match network input width {}",
            self.spec.input_dim()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(MlpSpec::new(3, &[4, 5], 2));
        assert_eq!(mlp.apply(&[1.0, -2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let spec = MlpSpec::new(3, &[], 3);
        let mut params = vec![0.0; spec.n_params()];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let mlp = Mlp::from_params(spec, params);
        assert_eq!(mlp.apply(&[0.5, -1.5, 2.0]), vec![0.5, -1.5, 2.0]);
    }

    #[test]
    fn init_is_deterministic_in_seed() {
        let a = Mlp::init(MlpSpec::new(4, &[8], 2).with_seed(7));
        let b = Mlp::init(MlpSpec::new(4, &[8], 2).with_seed(7));
        let c = Mlp::init(MlpSpec::new(4, &[8], 2).with_seed(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mlp = Mlp::init(MlpSpec::new(16, &[], 4).with_seed(3));
        assert!(mlp.params().iter().all(|p| p.abs() <= 0.25));
    }

    #[test]
    fn batched_forward_matches_rowwise() {
        let mlp = Mlp::init(MlpSpec::new(2, &[5, 3], 2).with_seed(11));
        let x = array![[0.1, -0.4], [2.0, 1.0], [-3.0, 0.5]];
        let batch = mlp.forward(x.view());
        for i in 0..3 {
            let single = mlp.apply(x.row(i).as_slice().unwrap());
            for (a, b) in single.iter().zip(batch.row(i)) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    #[should_panic(expected = "input dimension")]
    fn dimension_mismatch_panics() {
        let mlp = Mlp::zeros(MlpSpec::new(3, &[2], 1));
        mlp.apply(&[1.0, 2.0]);
    }

    #[test]
    fn exp_half_maps_log_variance_to_std() {
        let a = Activation::ExpHalf;
        assert!((a.apply(2.0f64.ln() * 2.0) - 2.0).abs() < 1e-12);
        assert_eq!(a.apply(100.0), (0.5 * LOG_VAR_MAX).exp());
        assert_eq!(a.apply(-100.0), (0.5 * LOG_VAR_MIN).exp());
        assert_eq!(a.derivative(100.0, a.apply(100.0)), 0.0);
    }
}
