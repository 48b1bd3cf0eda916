use crate::error::{check_finite, check_len, Error, Result};

use super::matrix::DenseMatrix;

/// Symmetric tridiagonal matrix: `alpha` on the diagonal, `beta` on both
/// off-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("tridiagonal system needs at least one entry"));
        }
        check_len("tridiagonal off-diagonal", alpha.len() - 1, beta.len())?;
        check_finite("tridiagonal alpha", &alpha)?;
        check_finite("tridiagonal beta", &beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::from_diagonal(&self.alpha);
        for (i, &b) in self.beta.iter().enumerate() {
            m[(i, i + 1)] = b;
            m[(i + 1, i)] = b;
        }
        debug_assert_eq!(m.rows(), n);
        m
    }
}

/// Eigen-decomposition of a symmetric tridiagonal matrix.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the returned matrix. Uses the implicit QL
/// iteration with Wilkinson-style shifts, accumulating the plane rotations.
pub fn symtridiag_eig(t: &TridiagonalSystem) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = t.len();
    let mut d = t.alpha.clone();
    // e[i] couples rows i and i + 1; e[n - 1] is scratch.
    let mut e = t.beta.clone();
    e.push(0.0);
    let mut z = DenseMatrix::identity(n);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 100 {
                return Err(Error::invalid(format!(
                    "tridiagonal QL failed to converge for eigenvalue {l}"
                )));
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[(k, i + 1)];
                    let zk = z[(k, i)];
                    z[(k, i + 1)] = s * zk + c * zk1;
                    z[(k, i)] = c * zk - s * zk1;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    Ok(sort_descending(d, &z))
}

/// Stable sort of eigenpairs by descending eigenvalue; `vectors` holds one
/// eigenvector per column.
pub(crate) fn sort_descending(values: Vec<f64>, vectors: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut out = DenseMatrix::zeros(vectors.rows(), order.len());
    for (new, &old) in order.iter().enumerate() {
        for k in 0..vectors.rows() {
            out[(k, new)] = vectors[(k, old)];
        }
    }
    (sorted, out)
}
