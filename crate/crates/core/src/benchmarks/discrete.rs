//! Finite joint laws whose expectations can be summed exactly.

use ndarray::Array2;

/// A joint probability table `p[x][y]` over finite supports.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    table: Array2<f64>,
}

impl DiscreteJoint {
    /// Panics unless the entries are non-negative and sum to one.
    pub fn new(table: Array2<f64>) -> Self {
        assert!(table.iter().all(|&p| p >= 0.0), "probabilities must be non-negative");
        let total = table.sum();
        assert!((total - 1.0).abs() < 1e-12, "probabilities sum to {total}, not 1");
        Self { table }
    }

    /// The binary toy with `p(0,0) = p(1,1) = 0.4` and `p(0,1) = p(1,0) = 0.1`.
    pub fn four_outcome() -> Self {
        Self::new(ndarray::array![[0.4, 0.1], [0.1, 0.4]])
    }

    /// The uniform law on the same support.
    pub fn uniform(nx: usize, ny: usize) -> Self {
        Self::new(Array2::from_elem((nx, ny), 1.0 / (nx * ny) as f64))
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn shape(&self) -> (usize, usize) {
        self.table.dim()
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.table[[x, y]]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        self.table.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// `p(x) p(y)`.
    pub fn product_of_marginals(&self) -> Self {
        let (px, py) = (self.marginal_x(), self.marginal_y());
        Self::new(Array2::from_shape_fn(self.shape(), |(x, y)| px[x] * py[y]))
    }

    /// `p(x) p(y | code(x))`: `y` is redrawn from the rows sharing the code.
    pub fn code_conditioned(&self, codes: &[usize]) -> Self {
        let by_code = self.merge_x(codes);
        let code_mass = by_code.marginal_x();
        let px = self.marginal_x();
        Self::new(Array2::from_shape_fn(self.shape(), |(x, y)| {
            let c = codes[x];
            if code_mass[c] > 0.0 {
                px[x] * by_code.p(c, y) / code_mass[c]
            } else {
                0.0
            }
        }))
    }

    /// The joint of `(code(x), y)`.
    pub fn merge_x(&self, codes: &[usize]) -> Self {
        let (nx, ny) = self.shape();
        assert_eq!(codes.len(), nx, "one code per x outcome");
        let n_codes = codes.iter().max().map_or(0, |m| m + 1);
        let mut t = Array2::<f64>::zeros((n_codes, ny));
        for x in 0..nx {
            for y in 0..ny {
                t[[codes[x], y]] += self.table[[x, y]];
            }
        }
        Self::new(t)
    }

    /// `E_p[f]`.
    pub fn expect(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        self.table
            .indexed_iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|((x, y), &p)| p * f(x, y))
            .sum()
    }

    /// `KL(self || other)`; infinite if `other` misses mass of `self`.
    pub fn kl(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "supports differ");
        self.expect(|x, y| {
            let q = other.p(x, y);
            if q > 0.0 {
                (self.p(x, y) / q).ln()
            } else {
                f64::INFINITY
            }
        })
    }

    /// `I(x; y)` in nats.
    pub fn mutual_information(&self) -> f64 {
        self.kl(&self.product_of_marginals())
    }

    /// `chi^2(self || other) = sum self^2 / other - 1`.
    pub fn chi_squared(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "supports differ");
        self.table
            .iter()
            .zip(other.table.iter())
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &q)| if q > 0.0 { p * p / q } else { f64::INFINITY })
            .sum::<f64>()
            - 1.0
    }

    /// `q = self * e^f / Z` together with `Z = E_self[e^f]`.
    pub fn tilt(&self, f: impl Fn(usize, usize) -> f64) -> (Self, f64) {
        let w = Array2::from_shape_fn(self.shape(), |(x, y)| self.table[[x, y]] * f(x, y).exp());
        let z = w.sum();
        (Self::new(w / z), z)
    }

    /// The table as `n` equally weighted outcomes, when every probability is
    /// a multiple of `1 / n`.
    pub fn as_equal_weights(&self, n: usize) -> Option<Vec<(usize, usize)>> {
        let mut out = Vec::with_capacity(n);
        for ((x, y), &p) in self.table.indexed_iter() {
            let count = p * n as f64;
            if (count - count.round()).abs() > 1e-9 {
                return None;
            }
            out.extend(std::iter::repeat_n((x, y), count.round() as usize));
        }
        (out.len() == n).then_some(out)
    }
}
