//! Scalar reverse-mode automatic differentiation.
//!
//! Every operation appends a node holding its value, up to two parent indices
//! and the local partial derivatives with respect to those parents. Nodes are
//! only ever appended, so creation order is a topological order and the
//! backward pass is a single reverse sweep.
//!
//! The tape is the reference differentiation path: the batched network code in
//! [`crate::nn::Mlp`] is checked against it.

/// Handle to a node on a [`ParamTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpTag {
    Param,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Relu,
    Softplus,
    Scale,
    Offset,
}

#[derive(Clone, Debug)]
struct Node {
    value: f64,
    grad: f64,
    parents: [usize; 2],
    local: [f64; 2],
    arity: u8,
    op: OpTag,
}

#[derive(Clone, Debug, Default)]
pub struct ParamTape {
    nodes: Vec<Node>,
    params: Vec<usize>,
}

impl ParamTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, op: OpTag, parents: &[(usize, f64)]) -> Var {
        let mut node = Node {
            value,
            grad: 0.0,
            parents: [0; 2],
            local: [0.0; 2],
            arity: parents.len() as u8,
            op,
        };
        for (slot, &(p, d)) in parents.iter().enumerate() {
            node.parents[slot] = p;
            node.local[slot] = d;
        }
        self.nodes.push(node);
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf. Its gradient is reported by [`ParamTape::backward`].
    pub fn param(&mut self, value: f64) -> Var {
        let v = self.push(value, OpTag::Param, &[]);
        self.params.push(v.0);
        v
    }

    pub fn params(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.param(v)).collect()
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(value, OpTag::Const, &[])
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> f64 {
        self.nodes[v.0].grad
    }

    pub fn op(&self, v: Var) -> OpTag {
        self.nodes[v.0].op
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, OpTag::Add, &[(a.0, 1.0), (b.0, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, OpTag::Sub, &[(a.0, 1.0), (b.0, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va * vb, OpTag::Mul, &[(a.0, vb), (b.0, va)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va / vb, OpTag::Div, &[(a.0, 1.0 / vb), (b.0, -va / (vb * vb))])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = -self.value(a);
        self.push(value, OpTag::Neg, &[(a.0, -1.0)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).exp();
        self.push(value, OpTag::Exp, &[(a.0, value)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.push(va.ln(), OpTag::Ln, &[(a.0, 1.0 / va)])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let (value, d) = if va > 0.0 { (va, 1.0) } else { (0.0, 0.0) };
        self.push(value, OpTag::Relu, &[(a.0, d)])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.push(softplus(va), OpTag::Softplus, &[(a.0, sigmoid(va))])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, OpTag::Scale, &[(a.0, c)])
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) + c;
        self.push(value, OpTag::Offset, &[(a.0, 1.0)])
    }

    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let mut iter = terms.iter().copied();
        let first = match iter.next() {
            Some(v) => v,
            None => return self.constant(0.0),
        };
        iter.fold(first, |acc, v| self.add(acc, v))
    }

    pub fn mean(&mut self, terms: &[Var]) -> Var {
        let total = self.sum(terms);
        self.scale(total, 1.0 / terms.len().max(1) as f64)
    }

    /// `log(mean(exp(terms)))`, stabilized by the maximum term.
    pub fn log_mean_exp(&mut self, terms: &[Var]) -> Var {
        assert!(!terms.is_empty(), "log_mean_exp of an empty set");
        let shift = terms
            .iter()
            .map(|&t| self.value(t))
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<Var> = terms
            .iter()
            .map(|&t| {
                let centered = self.offset(t, -shift);
                self.exp(centered)
            })
            .collect();
        let m = self.mean(&exps);
        let l = self.ln(m);
        self.offset(l, shift)
    }

    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        assert_eq!(a.len(), b.len(), "dot product of unequal lengths");
        let prods: Vec<Var> = a.iter().zip(b).map(|(&x, &y)| self.mul(x, y)).collect();
        self.sum(&prods)
    }

    /// Reverse sweep from the scalar `root`. Returns the gradient of `root`
    /// with respect to every [`ParamTape::param`] leaf, in registration order.
    ///
    /// Gradients from a previous sweep are cleared first.
    pub fn backward(&mut self, root: Var) -> Vec<f64> {
        assert!(root.0 < self.nodes.len(), "root is not a node of this tape");
        for n in &mut self.nodes {
            n.grad = 0.0;
        }
        self.nodes[root.0].grad = 1.0;
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let g = node.grad;
            if g == 0.0 {
                continue;
            }
            let (arity, parents, local) = (node.arity as usize, node.parents, node.local);
            for k in 0..arity {
                self.nodes[parents[k]].grad += g * local[k];
            }
        }
        self.params.iter().map(|&p| self.nodes[p].grad).collect()
    }

    /// [`ParamTape::backward`] for a network output. The root must be a single
    /// scalar; vector-valued outputs are a contract violation.
    pub fn backward_output(&mut self, outputs: &[Var]) -> Vec<f64> {
        assert_eq!(outputs.len(), 1, "backward requires a scalar root");
        self.backward(outputs[0])
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_root_has_zero_gradients() {
        let mut t = ParamTape::new();
        let w = t.param(2.0);
        let c = t.constant(5.0);
        let _unused = t.mul(w, w);
        let g = t.backward(c);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn linear_root() {
        let mut t = ParamTape::new();
        let w = t.param(0.7);
        let x = t.constant(3.0);
        let y = t.mul(w, x);
        assert_eq!(t.backward(y), vec![3.0]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f(a) = a * a + exp(a), f'(a) = 2a + exp(a)
        let mut t = ParamTape::new();
        let a = t.param(0.3);
        let sq = t.mul(a, a);
        let e = t.exp(a);
        let f = t.add(sq, e);
        let g = t.backward(f);
        assert!((g[0] - (0.6 + 0.3f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn log_mean_exp_matches_direct_formula() {
        let mut t = ParamTape::new();
        let xs = t.params(&[0.1, -2.0, 3.5]);
        let l = t.log_mean_exp(&xs);
        let direct = ((0.1f64.exp() + (-2.0f64).exp() + 3.5f64.exp()) / 3.0).ln();
        assert!((t.value(l) - direct).abs() < 1e-14);
        let g = t.backward(l);
        // softmax weights
        let z: f64 = [0.1f64, -2.0, 3.5].iter().map(|v| v.exp()).sum();
        for (gi, xi) in g.iter().zip([0.1f64, -2.0, 3.5]) {
            assert!((gi - xi.exp() / z).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_is_repeatable() {
        let mut t = ParamTape::new();
        let a = t.param(1.5);
        let s = t.softplus(a);
        let g1 = t.backward(s);
        let g2 = t.backward(s);
        assert_eq!(g1, g2);
        assert!((g1[0] - sigmoid(1.5)).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "scalar root")]
    fn vector_root_is_rejected() {
        let mut t = ParamTape::new();
        let a = t.param(1.0);
        let b = t.param(2.0);
        t.backward_output(&[a, b]);
    }

    #[test]
    fn softplus_is_stable_and_positive() {
        for x in [-800.0, -30.0, 0.0, 30.0, 800.0] {
            let s = softplus(x);
            assert!(s.is_finite() && s >= 0.0);
        }
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(-40.0) > 0.0);
    }
}
