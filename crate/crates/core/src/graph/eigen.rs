//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm at which iteration stops, relative to
/// `max(1, ||A||_F)`.
const OFF_DIAG_TOL: f64 = 1e-12;
/// Eigenvalues in `(-CLAMP, 0)` are snapped to zero.
const CLAMP: f64 = 1e-10;

/// `L = U diag(values) U^T` with eigenvalues ascending and eigenvectors in
/// the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub vectors: Array2<f64>,
    pub values: Array1<f64>,
}

impl EigenSystem {
    pub fn lambda_max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `U diag(f(values)) U^T`.
    pub fn spectral_function(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        self.spectral_function_indexed(|k| f(self.values[k]))
    }

    /// `U diag(r) U^T` with `r_k = response(k)` for eigenpair `k`.
    pub fn spectral_function_indexed(&self, response: impl Fn(usize) -> f64) -> Array2<f64> {
        let n = self.len();
        let r: Vec<f64> = (0..n).map(response).collect();
        let scaled = Array2::from_shape_fn((n, n), |(i, k)| self.vectors[(i, k)] * r[k]);
        let m = scaled.dot(&self.vectors.t());
        // exact symmetry; the product is symmetric only up to rounding
        Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[(i, j)] + m[(j, i)]))
    }
}

pub fn eigendecompose(matrix: &Array2<f64>) -> Result<EigenSystem> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::shape("eigendecompose", "square matrix", format!("{}x{}", n, matrix.ncols())));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigendecompose input".into()));
    }
    let asym = matrix
        .indexed_iter()
        .map(|((i, j), &v)| (v - matrix[(j, i)]).abs())
        .fold(0.0, f64::max);
    let scale = matrix.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::Data(format!("eigendecompose: matrix not symmetric (max |A - A^T| = {asym:e})")));
    }

    let mut a: Vec<f64> = matrix.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = OFF_DIAG_TOL * scale;

    let off_norm = |a: &[f64]| -> f64 {
        let mut sum = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                sum += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        sum.sqrt()
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        let new_p = c * akp - s * akq;
                        let new_q = s * akp + c * akq;
                        a[k * n + p] = new_p;
                        a[p * n + k] = new_p;
                        a[k * n + q] = new_q;
                        a[q * n + k] = new_q;
                    }
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = off_norm(&a);
        if residual > tol {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS, residual });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = Array1::from_iter(order.iter().map(|&k| {
        let lam = a[k * n + k];
        if lam < 0.0 && lam > -CLAMP {
            0.0
        } else {
            lam
        }
    }));
    let vectors = Array2::from_shape_fn((n, n), |(i, col)| v[i * n + order[col]]);
    Ok(EigenSystem { vectors, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frob(m: &Array2<f64>) -> f64 {
        m.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn diagonal_input() {
        let es = eigendecompose(&array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(es.values.to_vec(), vec![1.0, 2.0, 3.0]);
        // columns are a permutation of the identity
        for col in es.vectors.columns() {
            assert_eq!(col.iter().filter(|v| v.abs() == 1.0).count(), 1);
        }
    }

    #[test]
    fn zero_matrix_gives_identity_basis() {
        let es = eigendecompose(&Array2::zeros((4, 4))).unwrap();
        assert!(es.values.iter().all(|&v| v == 0.0));
        assert_eq!(es.vectors, Array2::<f64>::eye(4));
    }

    #[test]
    fn three_node_unit_path() {
        // eigenvalues of [[1,-1,0],[-1,2,-1],[0,-1,1]] are 0, 1, 3 (char. poly -x(x-1)(x-3))
        let l = array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let es = eigendecompose(&l).unwrap();
        for (got, want) in es.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        }
        assert_eq!(es.lambda_max(), es.values[2]);
    }

    #[test]
    fn random_reconstruction() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, "eig-test");
        for n in [1, 2, 5, 10, 17] {
            let mut m = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let x = rng.random_range(-1.0..1.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let es = eigendecompose(&m).unwrap();
            let recon = es.spectral_function(|x| x);
            assert!(frob(&(&recon - &m)) <= 1e-10 * frob(&m).max(1.0));
            let ortho = es.vectors.t().dot(&es.vectors) - Array2::<f64>::eye(n);
            assert!(frob(&ortho) <= 1e-10);
            assert!(es.values.windows(2).into_iter().all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eigendecompose(&Array2::zeros((2, 3))).is_err());
        assert!(eigendecompose(&array![[0.0, 1.0], [0.0, 0.0]]).is_err());
    }
}
