use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and a matrix whose columns are the
/// matching orthonormal eigenvectors. Sweeps stop once the off-diagonal Frobenius
/// norm drops below `1e-12` times the Frobenius norm of the input, or after 100
/// sweeps.
pub fn symmetric_eig(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
    }
    let n = m.rows();
    let scale = m.as_slice().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }

    // work on the symmetrized copy
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let frob = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, src)];
        }
    }
    Ok((values, vectors))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn random_symmetric(n: usize, rng: &mut SeededRng) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.normal();
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    fn reconstruct(values: &[f64], vectors: &Matrix) -> Matrix {
        let lambda = Matrix::from_diag(values);
        vectors.matmul(&lambda).unwrap().matmul(&vectors.transpose()).unwrap()
    }

    #[test]
    fn identity() {
        let (vals, _) = symmetric_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let (vals, vecs) = symmetric_eig(&Matrix::from_diag(&[1.0, 4.0])).unwrap();
        assert_eq!(vals, vec![4.0, 1.0]);
        assert_eq!(vecs[(1, 0)].abs(), 1.0);
        assert_eq!(vecs[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn not_symmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eig(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = SeededRng::new(11);
        let m = random_symmetric(8, &mut rng);
        let (vals, vecs) = symmetric_eig(&m).unwrap();
        assert!(reconstruct(&vals, &vecs).max_abs_diff(&m) <= 1e-7);
        let gram = vecs.transpose().matmul(&vecs).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(8)) <= 1e-7);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..8 {
            let col = vecs.column(i);
            let mv = m.mul_vec(&col).unwrap();
            for (a, b) in mv.iter().zip(&col) {
                assert!((a - vals[i] * b).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn trace_equals_eigen_sum() {
        let mut rng = SeededRng::new(5);
        for n in [1, 2, 5, 13, 32] {
            let m = random_symmetric(n, &mut rng);
            let (vals, _) = symmetric_eig(&m).unwrap();
            assert!((vals.iter().sum::<f64>() - m.trace()).abs() <= 1e-7);
        }
    }
}
