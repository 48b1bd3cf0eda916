use crate::error::{check_len, Error, Result};
use crate::geometry::SubspaceBasis;
use crate::linalg::{axpy, dot, norm, orthonormalize_rows, scale, seeded_gaussian_vector, symtridiag_eig, DenseMatrix, TridiagonalSystem};

use super::SymmetricOperator;

/// Default number of Lanczos steps.
pub const DEFAULT_STEPS: usize = 100;

/// Ritz pair `(λ, v)` counts as converged when `‖Av - λv‖ ≤ tol · max(1, |λ|)`.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosConfig {
    pub steps: usize,
    pub seed: u64,
    /// How many of the largest Ritz pairs get explicit vectors and residuals.
    /// Each costs one extra operator application.
    pub vectors: usize,
    pub convergence_tol: f64,
}

impl LanczosConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            seed,
            vectors: steps,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
        }
    }

    pub fn with_vectors(mut self, vectors: usize) -> Self {
        self.vectors = vectors;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }
}

/// Ritz values of one Lanczos run, descending, plus vectors and residuals for
/// the leading pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    ritz_values: Vec<f64>,
    /// One unit-norm Ritz vector per row, for the first `ritz_vectors.rows()`
    /// values.
    ritz_vectors: DenseMatrix,
    residual_norms: Vec<f64>,
    iterations: usize,
    operator_dim: usize,
    convergence_tol: f64,
}

impl SpectrumResult {
    pub fn ritz_values(&self) -> &[f64] {
        &self.ritz_values
    }

    pub fn ritz_vectors(&self) -> &DenseMatrix {
        &self.ritz_vectors
    }

    pub fn ritz_vector(&self, i: usize) -> &[f64] {
        self.ritz_vectors.row(i)
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// Lanczos steps actually taken (fewer than requested after breakdown).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn operator_dim(&self) -> usize {
        self.operator_dim
    }

    pub fn convergence_tol(&self) -> f64 {
        self.convergence_tol
    }

    pub fn lambda_max(&self) -> f64 {
        self.ritz_values[0]
    }

    /// Smallest Ritz value (the most negative one when the spectrum is indefinite).
    pub fn lambda_min(&self) -> f64 {
        *self.ritz_values.last().unwrap()
    }

    pub fn vector_count(&self) -> usize {
        self.ritz_vectors.rows()
    }

    pub fn is_converged(&self, i: usize) -> bool {
        i < self.residual_norms.len()
            && self.residual_norms[i] <= self.convergence_tol * self.ritz_values[i].abs().max(1.0)
    }

    /// Number of leading Ritz pairs that meet the convergence criterion.
    pub fn converged_prefix(&self) -> usize {
        (0..self.vector_count()).take_while(|&i| self.is_converged(i)).count()
    }

    /// The `m` leading Ritz vectors, re-orthonormalized. All `m` pairs must be
    /// converged.
    pub fn top_subspace(&self, m: usize) -> Result<SubspaceBasis> {
        let converged = self.converged_prefix();
        if m > converged {
            return Err(Error::NotConverged { converged, requested: m });
        }
        self.leading_subspace(m)
    }

    /// As [`top_subspace`](Self::top_subspace) without the convergence check;
    /// only requires that vectors were computed.
    pub fn leading_subspace(&self, m: usize) -> Result<SubspaceBasis> {
        if m == 0 || m > self.vector_count() {
            return Err(Error::invalid(format!(
                "requested {m} ritz vectors, {} available",
                self.vector_count()
            )));
        }
        let rows: Vec<&[f64]> = (0..m).map(|i| self.ritz_vector(i)).collect();
        let mut basis = DenseMatrix::from_rows(&rows)?;
        let degenerate = orthonormalize_rows(&mut basis, 1e-8);
        if degenerate > 0 {
            return Err(Error::invalid(format!(
                "{degenerate} of the top {m} ritz vectors are linearly dependent"
            )));
        }
        SubspaceBasis::new(basis)
    }
}

/// `steps` Lanczos iterations from a seeded Gaussian start vector with full
/// re-orthogonalization of every new Lanczos vector against all earlier ones.
///
/// Ritz vectors are assembled as `V = S_Tᵀ Q` where `S_T` holds the
/// eigenvectors of the tridiagonal matrix and `Q` the Lanczos vectors (rows),
/// and each reported pair's residual is measured with one extra operator
/// application. The recurrence stops early when the off-diagonal falls below
/// `1e-12` of the running spectral scale (an invariant subspace).
pub fn lanczos(op: &impl SymmetricOperator, config: &LanczosConfig) -> Result<SpectrumResult> {
    let dim = op.dim();
    if config.steps == 0 || config.steps > dim {
        return Err(Error::invalid(format!(
            "lanczos steps must lie in 1..={dim}, got {}",
            config.steps
        )));
    }

    let mut q0 = seeded_gaussian_vector(dim, config.seed)?;
    let n0 = norm(&q0);
    scale(1.0 / n0, &mut q0);

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha = Vec::with_capacity(config.steps);
    let mut beta: Vec<f64> = Vec::with_capacity(config.steps);
    let mut spread = 0.0f64;

    for j in 0..config.steps {
        let mut w = apply_checked(op, &basis[j], j)?;
        let a = dot(&basis[j], &w);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        spread = spread.max(a.abs()).max(b);
        if j + 1 == config.steps || b <= 1e-12 * spread.max(1.0) {
            break;
        }
        scale(1.0 / b, &mut w);
        beta.push(b);
        basis.push(w);
    }

    let iterations = alpha.len();
    beta.truncate(iterations - 1);
    let tri = TridiagonalSystem::new(alpha, beta)?;
    let (values, s) = symtridiag_eig(&tri)?;

    let reported = config.vectors.min(iterations);
    let mut vectors = DenseMatrix::zeros(reported, dim);
    let mut residuals = Vec::with_capacity(reported);
    for i in 0..reported {
        let row = vectors.row_mut(i);
        for (j, q) in basis.iter().enumerate() {
            axpy(s[(j, i)], q, row);
        }
        let n = norm(row);
        scale(1.0 / n, row);
        let av = apply_checked(op, vectors.row(i), iterations + i)?;
        residuals.push(residual_norm(&av, vectors.row(i), values[i]));
    }

    let mut result = SpectrumResult {
        ritz_values: values,
        ritz_vectors: vectors,
        residual_norms: residuals,
        iterations,
        operator_dim: dim,
        convergence_tol: config.convergence_tol,
    };
    collapse_ghosts(&mut result);
    Ok(result)
}

fn apply_checked(op: &impl SymmetricOperator, x: &[f64], iteration: usize) -> Result<Vec<f64>> {
    let y = op.apply(x)?;
    check_len("operator output", x.len(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMatvec { iteration });
    }
    Ok(y)
}

/// `‖A v - λ v‖` given `av = A v`.
pub fn residual_norm(av: &[f64], v: &[f64], lambda: f64) -> f64 {
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Drops repeated Ritz pairs: values within `1e-10 |λ|` whose vectors have
/// `|cos| > 0.99`. The copy with the smaller residual survives.
fn collapse_ghosts(r: &mut SpectrumResult) {
    let n = r.vector_count();
    let mut dropped = vec![false; n];
    for i in 0..n {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..n {
            if dropped[j] {
                continue;
            }
            let (li, lj) = (r.ritz_values[i], r.ritz_values[j]);
            if (li - lj).abs() >= 1e-10 * li.abs().max(lj.abs()) {
                break;
            }
            if dot(r.ritz_vectors.row(i), r.ritz_vectors.row(j)).abs() > 0.99 {
                if r.residual_norms[j] < r.residual_norms[i] {
                    dropped[i] = true;
                    break;
                }
                dropped[j] = true;
            }
        }
    }
    if !dropped.contains(&true) {
        return;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !dropped[i]).collect();
    let rows: Vec<&[f64]> = keep.iter().map(|&i| r.ritz_vectors.row(i)).collect();
    let vectors = DenseMatrix::from_rows(&rows).unwrap_or_else(|_| DenseMatrix::zeros(0, r.operator_dim));
    let residuals = keep.iter().map(|&i| r.residual_norms[i]).collect();
    let mut values: Vec<f64> = keep.iter().map(|&i| r.ritz_values[i]).collect();
    values.extend_from_slice(&r.ritz_values[n..]);
    r.ritz_values = values;
    r.ritz_vectors = vectors;
    r.residual_norms = residuals;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_breaks_down_after_one_step() {
        let op = DenseMatrix::identity(50);
        let r = lanczos(&op, &LanczosConfig::new(10, 3)).unwrap();
        assert_eq!(r.iterations(), 1);
        assert_eq!(r.ritz_values().len(), 1);
        assert!((r.lambda_max() - 1.0).abs() < 1e-14);
        assert!(r.residual_norms()[0] < 1e-14);
    }

    #[test]
    fn diagonal_spectrum_recovered() {
        let op = DenseMatrix::from_diagonal(&[1.0, 4.0, 2.0, 3.0]);
        let r = lanczos(&op, &LanczosConfig::new(4, 1)).unwrap();
        for (got, want) in r.ritz_values().iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        let top = r.top_subspace(2).unwrap();
        // vectors live on e2 (value 4) and e4 (value 3)
        assert!((top.vector(0)[1].abs() - 1.0).abs() < 1e-8);
        assert!((top.vector(1)[3].abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_step_counts() {
        let op = DenseMatrix::identity(3);
        assert!(lanczos(&op, &LanczosConfig::new(4, 0)).is_err());
        assert!(lanczos(&op, &LanczosConfig::new(0, 0)).is_err());
    }

    struct Poisoned;

    impl SymmetricOperator for Poisoned {
        fn dim(&self) -> usize {
            4
        }

        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().map(|_| f64::NAN).collect())
        }
    }

    #[test]
    fn non_finite_matvec_reports_iteration() {
        let err = lanczos(&Poisoned, &LanczosConfig::new(2, 0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteMatvec { iteration: 0 }));
    }

    #[test]
    fn unconverged_request_is_rejected() {
        let diag: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let op = DenseMatrix::from_diagonal(&diag);
        let r = lanczos(&op, &LanczosConfig::new(5, 2).with_tolerance(1e-12)).unwrap();
        assert!(matches!(r.top_subspace(5), Err(Error::NotConverged { requested: 5, .. })));
        assert!(r.leading_subspace(5).is_ok());
    }
}
