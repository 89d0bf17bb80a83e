use ndarray::{Array2, Axis};

/// Row-aligned draws `(x_i, y_i)`, optionally tagged with the quantization
/// code of each `x_i`. Datasets and minibatches share this type.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub codes: Option<Vec<usize>>,
}

impl SampleBatch {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Self {
        assert_eq!(x.nrows(), y.nrows(), "x and y must be row-aligned");
        Self { x, y, codes: None }
    }

    pub fn with_codes(mut self, codes: Vec<usize>) -> Self {
        assert_eq!(codes.len(), self.len(), "one code per row");
        self.codes = Some(codes);
        self
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn y_dim(&self) -> usize {
        self.y.ncols()
    }

    /// The shared code of a conditioned batch, if every row carries the same one.
    pub fn single_code(&self) -> Option<usize> {
        let codes = self.codes.as_ref()?;
        let first = *codes.first()?;
        codes.iter().all(|&c| c == first).then_some(first)
    }

    /// Gathers `rows` (repetitions allowed) into a new batch.
    pub fn select(&self, rows: &[usize]) -> SampleBatch {
        SampleBatch {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            codes: self
                .codes
                .as_ref()
                .map(|c| rows.iter().map(|&r| c[r]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn select_keeps_rows_aligned() {
        let b = SampleBatch::new(array![[1.0], [2.0], [3.0]], array![[10.0], [20.0], [30.0]])
            .with_codes(vec![0, 1, 1]);
        let s = b.select(&[2, 0, 2]);
        assert_eq!(s.x, array![[3.0], [1.0], [3.0]]);
        assert_eq!(s.y, array![[30.0], [10.0], [30.0]]);
        assert_eq!(s.codes, Some(vec![1, 0, 1]));
        assert_eq!(s.single_code(), None);
        assert_eq!(b.select(&[1, 2]).single_code(), Some(1));
    }

    #[test]
    #[should_panic(expected = "row-aligned")]
    fn misaligned_rows_panic() {
        SampleBatch::new(Array2::zeros((2, 1)), Array2::zeros((3, 1)));
    }
}
