use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng as _;

use crate::benchmarks::SampleBatch;
use crate::estimators::Negatives;
use crate::rng::Rng;
use crate::{Error, Result};

/// Dataset rows grouped by quantization code.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeIndex {
    rows: Vec<Vec<usize>>,
    /// Codes with at least two rows; only these are drawn.
    sampleable: Vec<usize>,
    weights: Option<WeightedIndex<usize>>,
}

impl CodeIndex {
    pub fn new(codes: &[usize], n_codes: usize) -> Self {
        let mut rows = vec![Vec::new(); n_codes];
        for (r, &c) in codes.iter().enumerate() {
            assert!(c < n_codes, "code {c} out of range for {n_codes} codes");
            rows[c].push(r);
        }
        let sampleable: Vec<usize> = (0..n_codes).filter(|&c| rows[c].len() >= 2).collect();
        let weights = WeightedIndex::new(sampleable.iter().map(|&c| rows[c].len())).ok();
        Self {
            rows,
            sampleable,
            weights,
        }
    }

    /// Indexes a dataset that already carries codes.
    pub fn from_batch(data: &SampleBatch, n_codes: usize) -> Self {
        Self::new(data.codes.as_deref().expect("dataset carries no codes"), n_codes)
    }

    pub fn n_codes(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self, code: usize) -> &[usize] {
        &self.rows[code]
    }

    pub fn is_sampleable(&self, code: usize) -> bool {
        self.rows[code].len() >= 2
    }

    pub fn sampleable_codes(&self) -> &[usize] {
        &self.sampleable
    }

    /// Probability with which `sample_conditional_batch` picks each code:
    /// empirical frequency renormalized over the sampleable codes.
    pub fn draw_probabilities(&self) -> Vec<f64> {
        let total: usize = self.sampleable.iter().map(|&c| self.rows[c].len()).sum();
        (0..self.n_codes())
            .map(|c| {
                if self.is_sampleable(c) {
                    self.rows[c].len() as f64 / total as f64
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn draw_code(&self, rng: &mut Rng) -> Result<usize> {
        let w = self.weights.as_ref().ok_or(Error::NoSampleableCode)?;
        Ok(self.sampleable[w.sample(rng)])
    }
}

/// `b` rows drawn uniformly with replacement.
pub fn sample_joint_batch(data: &SampleBatch, b: usize, rng: &mut Rng) -> SampleBatch {
    assert!(!data.is_empty(), "cannot sample from an empty dataset");
    data.select(&draw_positions(data.len(), b, rng))
}

/// `b` positions in `0..n`, distinct whenever `n >= b`. Smaller pools are
/// drawn with replacement so that every batch is full.
fn draw_positions(n: usize, b: usize, rng: &mut Rng) -> Vec<usize> {
    if n >= b {
        index::sample(rng, n, b).into_vec()
    } else {
        (0..b).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Draws a code with its empirical probability, then `b` rows of that code
/// (distinct unless the code holds fewer than `b` rows).
pub fn sample_conditional_batch(index: &CodeIndex, data: &SampleBatch, b: usize, rng: &mut Rng) -> Result<SampleBatch> {
    let code = index.draw_code(rng)?;
    let pool = index.rows(code);
    let rows: Vec<usize> = draw_positions(pool.len(), b, rng).into_iter().map(|p| pool[p]).collect();
    let mut batch = data.select(&rows);
    batch.codes = Some(vec![code; b]);
    Ok(batch)
}

/// Pairs every row `i` of a size-`b` batch with `k` distinct other rows.
/// With `k = b - 1` each row is paired with all the others.
pub fn shuffle_negatives(b: usize, k: usize, rng: &mut Rng) -> Negatives {
    assert!(k >= 1, "need at least one negative per row");
    assert!(k < b, "{k} negatives without replacement need a batch larger than {b}");
    let mut idx = Array2::zeros((b, k));
    for i in 0..b {
        if k == b - 1 {
            for (slot, j) in (0..b).filter(|&j| j != i).enumerate() {
                idx[[i, slot]] = j;
            }
        } else {
            for (slot, j) in index::sample(rng, b - 1, k).into_iter().enumerate() {
                idx[[i, slot]] = if j >= i { j + 1 } else { j };
            }
        }
    }
    Negatives::Shuffled(idx)
}

/// Like [`shuffle_negatives`] but drawing the `k` partners of each row with
/// replacement, so `k` may exceed `b - 1`.
pub fn resample_negatives(b: usize, k: usize, rng: &mut Rng) -> Negatives {
    assert!(b >= 2, "a row needs at least one other row to pair with");
    let idx = Array2::from_shape_fn((b, k), |(i, _)| {
        let j = rng.random_range(0..b - 1);
        if j >= i {
            j + 1
        } else {
            j
        }
    });
    Negatives::Shuffled(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn coded(codes: &[usize]) -> SampleBatch {
        let n = codes.len();
        let x = Array2::from_shape_fn((n, 1), |(r, _)| r as f64);
        let y = Array2::from_shape_fn((n, 1), |(r, _)| -(r as f64));
        SampleBatch::new(x, y).with_codes(codes.to_vec())
    }

    #[test]
    fn index_partitions_rows() {
        let codes = [2, 0, 2, 1, 2, 0];
        let ix = CodeIndex::new(&codes, 4);
        let mut all: Vec<usize> = (0..4).flat_map(|c| ix.rows(c).to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        assert_eq!(ix.sampleable_codes(), &[0, 2]);
        assert!(!ix.is_sampleable(1) && !ix.is_sampleable(3));
    }

    #[test]
    fn batches_stay_inside_one_code() {
        let data = coded(&[0, 1, 0, 1, 1, 2, 0]);
        let ix = CodeIndex::from_batch(&data, 3);
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let b = sample_conditional_batch(&ix, &data, 8, &mut rng).unwrap();
            let code = b.single_code().expect("one code");
            assert_ne!(code, 2, "singleton code drawn");
            for &x in b.x.iter() {
                assert_eq!(data.codes.as_ref().unwrap()[x as usize], code);
            }
        }
    }

    #[test]
    fn no_sampleable_code_is_an_error() {
        let data = coded(&[0, 1, 2]);
        let ix = CodeIndex::from_batch(&data, 3);
        let err = sample_conditional_batch(&ix, &data, 4, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::NoSampleableCode));
        assert!(err.to_string().contains("fewer clusters"));
    }

    #[test]
    fn two_row_batch_swaps() {
        let n = shuffle_negatives(2, 1, &mut rng_from_seed(0));
        assert_eq!(n, Negatives::Shuffled(ndarray::array![[1], [0]]));
    }

    #[test]
    fn shuffled_partners_exclude_self_and_repeat_nothing() {
        let mut rng = rng_from_seed(11);
        for k in [1, 3, 7] {
            let Negatives::Shuffled(idx) = shuffle_negatives(8, k, &mut rng) else { unreachable!() };
            for (i, row) in idx.rows().into_iter().enumerate() {
                let mut seen: Vec<usize> = row.to_vec();
                assert!(!seen.contains(&i));
                seen.sort_unstable();
                seen.dedup();
                assert_eq!(seen.len(), k);
            }
        }
    }

    #[test]
    #[should_panic(expected = "without replacement")]
    fn too_many_negatives_without_replacement() {
        shuffle_negatives(4, 4, &mut rng_from_seed(0));
    }

    #[test]
    fn resampled_partners_exclude_self() {
        let Negatives::Shuffled(idx) = resample_negatives(3, 20, &mut rng_from_seed(2)) else { unreachable!() };
        for (i, row) in idx.rows().into_iter().enumerate() {
            assert!(row.iter().all(|&j| j != i && j < 3));
        }
    }
}
