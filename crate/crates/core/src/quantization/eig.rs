use ndarray::{Array1, Array2};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as columns. Iterates until the off-diagonal Frobenius norm drops below
/// `1e-12` (relative to the matrix norm when that exceeds one).
pub fn symmetric_eig(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let scale = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for i in 0..n {
        for j in 0..i {
            assert!(
                (m[[i, j]] - m[[j, i]]).abs() <= SYMMETRY_TOL * scale,
                "matrix is not symmetric at ({i}, {j})"
            );
        }
    }
    let mut a = m.clone();
    let mut v = Array2::eye(n);
    let tol = 1e-12 * scale;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        vectors.column_mut(k).assign(&v.column(i));
    }
    (values, vectors)
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Zeroes `a[p][q]` with one Jacobi rotation, accumulating it into `v`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    if apq == 0.0 {
        return;
    }
    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = c * akp - s * akq;
        a[[k, q]] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = c * apk - s * aqk;
        a[[q, k]] = s * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng as _;

    #[test]
    fn identity_spectrum() {
        let (vals, _) = symmetric_eig(&Array2::eye(4));
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn two_by_two() {
        let (vals, vecs) = symmetric_eig(&array![[2.0, 1.0], [1.0, 2.0]]);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[[0, 0]].abs() - r).abs() < 1e-12);
        assert!((vecs[[0, 0]] - vecs[[1, 0]]).abs() < 1e-12);
        assert!((vecs[[0, 1]] + vecs[[1, 1]]).abs() < 1e-12);
    }

    #[test]
    fn reconstructs_random_symmetric() {
        let mut rng = rng_from_seed(17);
        for _ in 0..20 {
            let b = Array2::from_shape_simple_fn((8, 8), || rng.random_range(-2.0..2.0));
            let m = &b + &b.t();
            let (vals, vecs) = symmetric_eig(&m);
            let rebuilt = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
            let err = (&rebuilt - &m).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err <= 1e-9, "reconstruction error {err}");
            assert!(vals.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    #[should_panic(expected = "not symmetric")]
    fn rejects_asymmetric() {
        symmetric_eig(&array![[1.0, 2.0], [0.0, 1.0]]);
    }
}
