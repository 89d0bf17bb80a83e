use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::benchmarks::SampleBatch;
use crate::nn::{AdamState, ForwardCache, Mlp, MlpSpec, DEFAULT_HIDDEN};
use crate::rng::derive_seed;

pub const DEFAULT_EMBEDDING_DIM: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticKind {
    /// One network on the concatenated pair.
    Joint,
    /// Inner product of an `x` embedding and a `y` embedding.
    Separable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticConfig {
    pub kind: CriticKind,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            kind: CriticKind::Separable,
            hidden: DEFAULT_HIDDEN.to_vec(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

/// Proposal pairs for a batch: row `i` of either variant lists the `K`
/// partners of `x_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Negatives {
    /// `B x K` indices into the batch's own `y` rows.
    Shuffled(Array2<usize>),
    /// `B*K x Dy` fresh draws; row `i*K + j` is the `j`-th partner of `x_i`.
    Drawn { y: Array2<f64>, k: usize },
}

impl Negatives {
    pub fn per_row(&self) -> usize {
        match self {
            Negatives::Shuffled(idx) => idx.ncols(),
            Negatives::Drawn { k, .. } => *k,
        }
    }

    /// Materializes the `y` value of every proposal pair, row-major.
    pub fn partner_rows(&self, batch: &SampleBatch) -> Array2<f64> {
        match self {
            Negatives::Shuffled(idx) => batch.y.select(Axis(0), idx.as_slice().expect("standard layout")),
            Negatives::Drawn { y, .. } => y.clone(),
        }
    }

    fn check(&self, batch: &SampleBatch) {
        match self {
            Negatives::Shuffled(idx) => {
                assert_eq!(idx.nrows(), batch.len(), "one row of negatives per joint sample");
                assert!(idx.iter().all(|&j| j < batch.len()), "negative index out of range");
            }
            Negatives::Drawn { y, k } => {
                assert_eq!(y.nrows(), batch.len() * k, "expected B*K drawn rows");
                assert_eq!(y.ncols(), batch.y_dim(), "drawn y dimension mismatch");
            }
        }
    }
}

/// Scores of one batch plus whatever the backward pass needs.
pub struct CriticPass {
    pub joint: Vec<f64>,
    pub negatives: Array2<f64>,
    state: PassState,
}

enum PassState {
    Joint {
        cache: ForwardCache,
    },
    Separable {
        gx: ForwardCache,
        hy: ForwardCache,
        /// Partner row in `hy` of every negative, `B x K`.
        partners: Array2<usize>,
    },
}

/// The unnormalized critic `f(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    kind: CriticKind,
    nets: Vec<Mlp>,
}

impl Critic {
    pub fn new(config: &CriticConfig, x_dim: usize, y_dim: usize, seed: u64) -> Self {
        let nets = match config.kind {
            CriticKind::Joint => {
                vec![Mlp::init(MlpSpec::new(x_dim + y_dim, &config.hidden, 1).with_seed(seed))]
            }
            CriticKind::Separable => {
                let e = config.embedding_dim;
                vec![
                    Mlp::init(MlpSpec::new(x_dim, &config.hidden, e).with_seed(derive_seed(seed, 1))),
                    Mlp::init(MlpSpec::new(y_dim, &config.hidden, e).with_seed(derive_seed(seed, 2))),
                ]
            }
        };
        Self {
            kind: config.kind,
            nets,
        }
    }

    pub fn from_nets(kind: CriticKind, nets: Vec<Mlp>) -> Self {
        match kind {
            CriticKind::Joint => {
                assert_eq!(nets.len(), 1, "joint critic has one network");
                assert_eq!(nets[0].spec().output_dim(), 1, "joint critic outputs a scalar");
            }
            CriticKind::Separable => {
                assert_eq!(nets.len(), 2, "separable critic has two networks");
                assert_eq!(
                    nets[0].spec().output_dim(),
                    nets[1].spec().output_dim(),
                    "embedding dimensions differ"
                );
            }
        }
        Self { kind, nets }
    }

    /// A critic with `f(x, y) = value` everywhere: all weights zero, the
    /// constant carried by the output bias.
    pub fn constant(config: &CriticConfig, x_dim: usize, y_dim: usize, value: f64) -> Self {
        let last_bias = |net: &mut Mlp, v: f64| {
            let n = net.n_params();
            let out = net.spec().output_dim();
            net.params_mut()[n - out] = v;
        };
        match config.kind {
            CriticKind::Joint => {
                let mut net = Mlp::zeros(MlpSpec::new(x_dim + y_dim, &config.hidden, 1));
                last_bias(&mut net, value);
                Self::from_nets(CriticKind::Joint, vec![net])
            }
            CriticKind::Separable => {
                let e = config.embedding_dim;
                let mut g = Mlp::zeros(MlpSpec::new(x_dim, &config.hidden, e));
                let mut h = Mlp::zeros(MlpSpec::new(y_dim, &config.hidden, e));
                last_bias(&mut g, value);
                last_bias(&mut h, 1.0);
                Self::from_nets(CriticKind::Separable, vec![g, h])
            }
        }
    }

    pub fn kind(&self) -> CriticKind {
        self.kind
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn n_params(&self) -> usize {
        self.nets.iter().map(Mlp::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.params().iter().copied()).collect()
    }

    /// Scores of row-aligned pairs `(x_r, y_r)`.
    pub fn score_pairs(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Vec<f64> {
        assert_eq!(x.nrows(), y.nrows(), "x and y must be row-aligned");
        match self.kind {
            CriticKind::Joint => {
                let input = concatenate(Axis(1), &[x, y]).expect("row counts agree");
                self.nets[0].forward(input.view()).column(0).to_vec()
            }
            CriticKind::Separable => {
                let gx = self.nets[0].forward(x);
                let hy = self.nets[1].forward(y);
                (gx * hy).sum_axis(Axis(1)).to_vec()
            }
        }
    }

    pub fn score(&self, x: &[f64], y: &[f64]) -> f64 {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let yv = ArrayView2::from_shape((1, y.len()), y).expect("row");
        self.score_pairs(xv, yv)[0]
    }

    /// Scores of the joint pairs and of every proposal pair.
    pub fn forward(&self, batch: &SampleBatch, negatives: &Negatives) -> CriticPass {
        negatives.check(batch);
        let (b, k) = (batch.len(), negatives.per_row());
        match self.kind {
            CriticKind::Joint => {
                let partners = negatives.partner_rows(batch);
                let x_rep = batch.x.select(Axis(0), &repeat_rows(b, k));
                let ys = concatenate(Axis(0), &[batch.y.view(), partners.view()]).expect("same width");
                let xs = concatenate(Axis(0), &[batch.x.view(), x_rep.view()]).expect("same width");
                let input = concatenate(Axis(1), &[xs.view(), ys.view()]).expect("row counts agree");
                let cache = self.nets[0].forward_cached(input.view());
                let out = cache.output().column(0);
                let joint = out.slice(s![..b]).to_vec();
                let negatives = out
                    .slice(s![b..])
                    .to_owned()
                    .into_shape_with_order((b, k))
                    .expect("B*K scores");
                CriticPass {
                    joint,
                    negatives,
                    state: PassState::Joint { cache },
                }
            }
            CriticKind::Separable => {
                let gx = self.nets[0].forward_cached(batch.x.view());
                let (hy, partners) = match negatives {
                    Negatives::Shuffled(idx) => (self.nets[1].forward_cached(batch.y.view()), idx.clone()),
                    Negatives::Drawn { y, .. } => {
                        let ys = concatenate(Axis(0), &[batch.y.view(), y.view()]).expect("same width");
                        let partners = Array2::from_shape_fn((b, k), |(i, j)| b + i * k + j);
                        (self.nets[1].forward_cached(ys.view()), partners)
                    }
                };
                let (g, h) = (gx.output(), hy.output());
                let joint = (0..b).map(|i| g.row(i).dot(&h.row(i))).collect();
                let negatives = Array2::from_shape_fn((b, k), |(i, j)| g.row(i).dot(&h.row(partners[[i, j]])));
                CriticPass {
                    joint,
                    negatives,
                    state: PassState::Separable { gx, hy, partners },
                }
            }
        }
    }

    /// Parameter gradient of `sum(d_joint * joint) + sum(d_negatives * negatives)`.
    /// Inputs (including drawn proposal samples) are treated as constants.
    pub fn backward(&self, pass: &CriticPass, d_joint: &[f64], d_negatives: ArrayView2<'_, f64>) -> Vec<f64> {
        let b = pass.joint.len();
        assert_eq!(d_joint.len(), b, "joint gradient length mismatch");
        assert_eq!(d_negatives.dim(), pass.negatives.dim(), "negative gradient shape mismatch");
        match &pass.state {
            PassState::Joint { cache } => {
                let d_out: Vec<f64> = d_joint.iter().chain(d_negatives.iter()).copied().collect();
                let d_out = Array2::from_shape_vec((d_out.len(), 1), d_out).expect("column");
                self.nets[0].backward(cache, d_out.view())
            }
            PassState::Separable { gx, hy, partners } => {
                let (g, h) = (gx.output(), hy.output());
                let mut d_g = Array2::zeros(g.raw_dim());
                let mut d_h = Array2::zeros(h.raw_dim());
                for i in 0..b {
                    d_g.row_mut(i).scaled_add(d_joint[i], &h.row(i));
                    d_h.row_mut(i).scaled_add(d_joint[i], &g.row(i));
                    for (j, &p) in partners.row(i).iter().enumerate() {
                        let d = d_negatives[[i, j]];
                        d_g.row_mut(i).scaled_add(d, &h.row(p));
                        d_h.row_mut(p).scaled_add(d, &g.row(i));
                    }
                }
                let mut grads = self.nets[0].backward(gx, d_g.view());
                grads.extend(self.nets[1].backward(hy, d_h.view()));
                grads
            }
        }
    }

    /// One Adam step over the concatenated parameters of all networks.
    pub fn adam_step(&mut self, adam: &mut AdamState, grads: &[f64]) {
        assert_eq!(grads.len(), self.n_params(), "gradient length mismatch");
        let mut params = self.params();
        adam.step(&mut params, grads);
        self.set_params(&params);
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter count mismatch");
        let mut offset = 0;
        for net in &mut self.nets {
            let n = net.n_params();
            net.params_mut().copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
    }
}

fn repeat_rows(b: usize, k: usize) -> Vec<usize> {
    (0..b).flat_map(|i| std::iter::repeat_n(i, k)).collect()
}
