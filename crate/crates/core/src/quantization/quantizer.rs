use std::path::{Path, PathBuf};

use ndarray::{aview1, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::entropy::entropy_of_probabilities;
use super::kmeans::{kmeans_fit, nearest};
use super::sign::{sign_quantize, MAX_SIGN_DIMS};
use super::tica::tica_fit;
use crate::benchmarks::io::{read_json, read_matrix, write_json, write_matrix};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizerKind {
    Sign,
    KmeansOverTica,
}

/// Linear map applied before clustering: `(x - mean)[kept] * matrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub mean: Array1<f64>,
    pub kept_dims: Vec<usize>,
    pub matrix: Array2<f64>,
}

impl Projection {
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let kept: Array1<f64> = self.kept_dims.iter().map(|&j| x[j] - self.mean[j]).collect();
        kept.dot(&self.matrix)
    }
}

/// A fitted, immutable map from `x` to a discrete code.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantizer {
    kind: QuantizerKind,
    input_dim: usize,
    n_codes: usize,
    centroids: Option<Array2<f64>>,
    projection: Option<Projection>,
    code_probabilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    kind: QuantizerKind,
    input_dim: usize,
    n_codes: usize,
    code_probabilities: Vec<f64>,
    projection_mean: Option<Vec<f64>>,
    kept_dims: Option<Vec<usize>>,
}

impl Quantizer {
    /// Per-dimension sign codes; probabilities are the code frequencies in `data`.
    pub fn fit_sign(data: ArrayView2<'_, f64>) -> Self {
        let d = data.ncols();
        assert!(d <= MAX_SIGN_DIMS, "sign quantizer supports at most {MAX_SIGN_DIMS} dimensions");
        let mut q = Self {
            kind: QuantizerKind::Sign,
            input_dim: d,
            n_codes: 1 << d,
            centroids: None,
            projection: None,
            code_probabilities: Vec::new(),
        };
        q.code_probabilities = q.frequencies(data);
        q
    }

    /// k-means codes. With `tica = Some((lag, r))` the rows of `data` are
    /// treated as a time series and clustered in their top-`r` TICA coordinates;
    /// otherwise clustering happens in the input space.
    pub fn fit_kmeans(
        data: ArrayView2<'_, f64>,
        k: usize,
        tica: Option<(usize, usize)>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let projection = match tica {
            Some((lag, r)) => {
                let model = tica_fit(data, lag, r)?;
                Some(Projection {
                    matrix: model.projection(),
                    mean: model.mean,
                    kept_dims: model.kept_dims,
                })
            }
            None => None,
        };
        let features = match &projection {
            Some(p) => {
                let centered = &data - &p.mean;
                centered.select(Axis(1), &p.kept_dims).dot(&p.matrix)
            }
            None => data.to_owned(),
        };
        let fit = kmeans_fit(features.view(), k, rng);
        let mut q = Self {
            kind: QuantizerKind::KmeansOverTica,
            input_dim: data.ncols(),
            n_codes: k,
            centroids: Some(fit.centroids),
            projection,
            code_probabilities: Vec::new(),
        };
        q.code_probabilities = q.frequencies(data);
        Ok(q)
    }

    fn frequencies(&self, data: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut counts = vec![0u64; self.n_codes];
        for row in data.outer_iter() {
            counts[self.quantize_row(row)] += 1;
        }
        let n = data.nrows() as f64;
        counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_codes(&self) -> usize {
        self.n_codes
    }

    pub fn code_probabilities(&self) -> &[f64] {
        &self.code_probabilities
    }

    pub fn centroids(&self) -> Option<&Array2<f64>> {
        self.centroids.as_ref()
    }

    pub fn projection(&self) -> Option<&Projection> {
        self.projection.as_ref()
    }

    /// Plug-in entropy of the code distribution, `H(Q(x))`.
    pub fn code_entropy(&self) -> f64 {
        entropy_of_probabilities(&self.code_probabilities)
    }

    pub fn quantize(&self, x: &[f64]) -> usize {
        self.quantize_row(aview1(x))
    }

    pub fn quantize_row(&self, x: ArrayView1<'_, f64>) -> usize {
        assert_eq!(x.len(), self.input_dim, "quantizer input dimension mismatch");
        match self.kind {
            QuantizerKind::Sign => match x.as_slice() {
                Some(v) => sign_quantize(v),
                None => sign_quantize(&x.to_vec()),
            },
            QuantizerKind::KmeansOverTica => {
                let centroids = self.centroids.as_ref().expect("k-means quantizer has centroids");
                match &self.projection {
                    Some(p) => nearest(centroids.view(), p.apply(x).view()).0,
                    None => nearest(centroids.view(), x).0,
                }
            }
        }
    }

    pub fn quantize_rows(&self, data: ArrayView2<'_, f64>) -> Vec<usize> {
        data.outer_iter().map(|r| self.quantize_row(r)).collect()
    }

    fn matrix_paths(path: &Path) -> (PathBuf, PathBuf) {
        (path.with_extension("centroids.bin"), path.with_extension("projection.bin"))
    }

    /// Writes a JSON descriptor at `path` plus binary matrices beside it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (centroid_path, projection_path) = Self::matrix_paths(path);
        if let Some(c) = &self.centroids {
            write_matrix(&centroid_path, c)?;
        }
        if let Some(p) = &self.projection {
            write_matrix(&projection_path, &p.matrix)?;
        }
        write_json(
            path,
            &Descriptor {
                kind: self.kind,
                input_dim: self.input_dim,
                n_codes: self.n_codes,
                code_probabilities: self.code_probabilities.clone(),
                projection_mean: self.projection.as_ref().map(|p| p.mean.to_vec()),
                kept_dims: self.projection.as_ref().map(|p| p.kept_dims.clone()),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let desc: Descriptor = read_json(path)?;
        let (centroid_path, projection_path) = Self::matrix_paths(path);
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if desc.code_probabilities.len() != desc.n_codes {
            return Err(bad("code probability count does not match n_codes"));
        }
        let (centroids, projection) = match desc.kind {
            QuantizerKind::Sign => (None, None),
            QuantizerKind::KmeansOverTica => {
                let centroids = read_matrix(&centroid_path)?;
                if centroids.nrows() != desc.n_codes {
                    return Err(bad("centroid rows do not match n_codes"));
                }
                let projection = match (desc.projection_mean, desc.kept_dims) {
                    (Some(mean), Some(kept_dims)) => Some(Projection {
                        mean: Array1::from(mean),
                        kept_dims,
                        matrix: read_matrix(&projection_path)?,
                    }),
                    _ => None,
                };
                (Some(centroids), projection)
            }
        };
        Ok(Self {
            kind: desc.kind,
            input_dim: desc.input_dim,
            n_codes: desc.n_codes,
            centroids,
            projection,
            code_probabilities: desc.code_probabilities,
        })
    }
}
