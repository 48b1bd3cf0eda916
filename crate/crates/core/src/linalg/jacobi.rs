//! Jacobi-rotation methods: a cyclic Jacobi symmetric eigensolver used as a
//! dense reference, and a one-sided (Hestenes) Jacobi SVD.

use crate::error::{check_finite, Error, Result};

use super::matrix::{dot, norm, DenseMatrix};
use super::tridiag::sort_descending;

const MAX_SWEEPS: usize = 100;

/// Full eigen-decomposition of a dense symmetric matrix by cyclic Jacobi.
///
/// Eigenvalues come back descending; eigenvectors are the columns of the
/// returned matrix. Input must be symmetric to within `1e-12` (relative to
/// `max(1, max|a|)`).
pub fn dense_sym_eig_oracle(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    a.require_square("dense_sym_eig_oracle")?;
    check_finite("dense_sym_eig_oracle input", a.as_slice())?;
    let n = a.rows();
    let (gap, row, col) = a.max_asymmetry();
    if gap > 1e-12 * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { row, col, gap });
    }

    let mut m = a.clone();
    let mut vt = DenseMatrix::identity(n);
    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Negligible against both diagonal entries: annihilate.
                let g = 100.0 * apq.abs();
                if sweep > 3 && m[(p, p)].abs() + g == m[(p, p)].abs() && m[(q, q)].abs() + g == m[(q, q)].abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // rows p, q of JᵀMJ from the symmetric M, then mirror
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, p)] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
                m[(q, q)] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        m[(k, p)] = m[(p, k)];
                        m[(k, q)] = m[(q, k)];
                    }
                }
                // vt holds the eigenvectors as rows
                for k in 0..n {
                    let vpk = vt[(p, k)];
                    let vqk = vt[(q, k)];
                    vt[(p, k)] = c * vpk - s * vqk;
                    vt[(q, k)] = s * vpk + c * vqk;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "dense_sym_eig_oracle",
            sweeps: MAX_SWEEPS,
        });
    }
    let values = (0..n).map(|i| m[(i, i)]).collect();
    Ok(sort_descending(values, &vt.transpose()))
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// `cols × r` with orthonormal columns.
    pub v: DenseMatrix,
}

/// Thin SVD by one-sided Jacobi rotations.
pub fn thin_svd(a: &DenseMatrix) -> Result<Svd> {
    check_finite("thin_svd input", a.as_slice())?;
    if a.rows() < a.cols() {
        let t = thin_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (rows, cols) = a.shape();
    // Column-major working copies.
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| f64::from(u8::from(i == j))).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = u.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));

    let tiny = sigma.iter().fold(0.0f64, |m, s| m.max(*s)) * f64::EPSILON * rows as f64;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > tiny && sigma[j] > 0.0 {
            u_cols.push(u[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending);

    let mut u_out = DenseMatrix::zeros(rows, cols);
    let mut v_out = DenseMatrix::zeros(cols, cols);
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..rows {
            u_out[(i, slot)] = u_cols[slot][i];
        }
        for i in 0..cols {
            v_out[(i, slot)] = v[j][i];
        }
    }
    let singular_values = order
        .iter()
        .map(|&j| if sigma[j] > tiny { sigma[j] } else { 0.0 })
        .collect();
    Ok(Svd {
        u: u_out,
        singular_values,
        v: v_out,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to every
/// other column, drawing candidates from the standard basis.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize]) {
    if pending.is_empty() {
        return;
    }
    let dim = cols[0].len();
    let mut candidate = 0;
    for &slot in pending {
        while candidate < dim {
            let mut w = vec![0.0; dim];
            w[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let proj = dot(c, &w);
                    for (wi, ci) in w.iter_mut().zip(c) {
                        *wi -= proj * ci;
                    }
                }
            }
            let n = norm(&w);
            if n > 1e-8 {
                cols[slot] = w.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}
