//! Finite-difference references for the analytic derivatives. Independent of
//! the R-operator code path: they only call the loss and the gradient.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::{gradient, loss, Dataset, MlpSpec, ParamVector};

/// Largest parameter count the dense oracle accepts.
pub const ORACLE_MAX_PARAMS: usize = 5000;

const STEP: f64 = 1e-5;

/// Central differences of the loss, one coordinate at a time.
pub fn finite_difference_gradient(
    spec: &MlpSpec,
    params: &ParamVector,
    data: &Dataset,
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for j in 0..params.len() {
        let x = params.as_slice()[j];
        probe.as_mut_slice()[j] = x + step;
        let up = loss(spec, &probe, data)?;
        probe.as_mut_slice()[j] = x - step;
        let down = loss(spec, &probe, data)?;
        probe.as_mut_slice()[j] = x;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Unsymmetrized finite-difference Hessian: column `j` is
/// `(g(θ + h e_j) - g(θ - h e_j)) / 2h` with `h = 1e-5`.
pub fn finite_difference_hessian_columns(spec: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<DenseMatrix> {
    let n = params.len();
    if n > ORACLE_MAX_PARAMS {
        return Err(Error::invalid(format!(
            "dense hessian oracle limited to {ORACLE_MAX_PARAMS} parameters, network has {n}"
        )));
    }
    let mut h = DenseMatrix::zeros(n, n);
    let mut probe = params.clone();
    for j in 0..n {
        let x = params.as_slice()[j];
        probe.as_mut_slice()[j] = x + STEP;
        let up = gradient(spec, &probe, data)?;
        probe.as_mut_slice()[j] = x - STEP;
        let down = gradient(spec, &probe, data)?;
        probe.as_mut_slice()[j] = x;
        for i in 0..n {
            h[(i, j)] = (up.as_slice()[i] - down.as_slice()[i]) / (2.0 * STEP);
        }
    }
    Ok(h)
}

/// Dense Hessian from central differences of the gradient, symmetrized as
/// `(H + Hᵀ) / 2`.
pub fn dense_hessian_oracle(spec: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<DenseMatrix> {
    let raw = finite_difference_hessian_columns(spec, params, data)?;
    Ok(symmetrize(&raw))
}

pub(crate) fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    let mut s = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    s
}

/// Maximum absolute row sum.
pub fn infinity_norm(m: &DenseMatrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{LossKind, Targets};
    use ndarray::array;

    #[test]
    fn scalar_model_hessian() {
        // L(w, b) = (w + b)^2 on {(1, 0)}: H = [[2, 2], [2, 2]]
        let spec = MlpSpec::new(vec![1, 1], LossKind::MeanSquaredError).unwrap();
        let data = Dataset::new("s", array![[1.0]], Targets::Values(array![[0.0]])).unwrap();
        let p = ParamVector::new(spec.layout(), vec![3.0, 0.0]).unwrap();
        let h = dense_hessian_oracle(&spec, &p, &data).unwrap();
        for v in h.as_slice() {
            assert!((v - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn least_squares_hessian_is_scaled_gram() {
        // Features (x1, x2, 1); H = (2/b) Fᵀ F
        let spec = MlpSpec::new(vec![2, 1], LossKind::MeanSquaredError).unwrap();
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let data = Dataset::new("ls", x.clone(), Targets::Values(array![[0.5], [-0.25]])).unwrap();
        let p = ParamVector::new(spec.layout(), vec![0.1, -0.7, 0.3]).unwrap();
        let h = dense_hessian_oracle(&spec, &p, &data).unwrap();
        let f = [[1.0, 2.0, 1.0], [3.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = f.iter().map(|r| r[i] * r[j]).sum::<f64>() * 2.0 / 2.0;
                assert!((h[(i, j)] - expect).abs() < 1e-8, "h[{i},{j}]");
            }
        }
    }

    #[test]
    fn guard_rejects_large_networks() {
        let spec = MlpSpec::new(vec![100, 60, 2], LossKind::CrossEntropy).unwrap();
        let data = Dataset::new("g", ndarray::Array2::zeros((1, 100)), Targets::Classes(vec![0])).unwrap();
        assert!(dense_hessian_oracle(&spec, &ParamVector::zeros(&spec), &data).is_err());
    }
}
