//! Matrix-free Lanczos over symmetric operators and the quantities derived
//! from its Ritz values: outlier/bulk split, bulk variance proxy and
//! effective dimensionality.

mod lanczos;

pub use lanczos::{lanczos, residual_norm, LanczosConfig, SpectrumResult, DEFAULT_CONVERGENCE_TOL, DEFAULT_STEPS};

use crate::error::{check_len, Error, Result};
use crate::geometry::SubspaceBasis;
use crate::linalg::DenseMatrix;
use crate::mlp::Evaluation;

/// A symmetric linear map `R^N -> R^N` known only through products.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matvec(x)
    }
}

/// Adapts a closure into an operator of the given dimension.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> SymmetricOperator for FnOperator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("operator input", self.dim, x.len())?;
        (self.f)(x)
    }
}

/// Loss Hessian restricted to the parameters of the last `k` layers,
/// evaluated at a fixed point. `k = depth` is the full Hessian.
pub struct HessianOperator<'e, 'a> {
    eval: &'e Evaluation<'a>,
    k: usize,
    dim: usize,
}

impl<'e, 'a> HessianOperator<'e, 'a> {
    pub fn full(eval: &'e Evaluation<'a>) -> Self {
        let k = eval.depth();
        Self::reduced(eval, k).expect("full depth is always valid")
    }

    pub fn reduced(eval: &'e Evaluation<'a>, k: usize) -> Result<Self> {
        let dim = eval.reduced_dim(k)?;
        Ok(Self { eval, k, dim })
    }
}

impl SymmetricOperator for HessianOperator<'_, '_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval.reduced_hvp(self.k, x)
    }
}

/// `H ≈ V_o W_o V_oᵀ + H_bulk` with `m` positive outliers.
#[derive(Clone, Debug, PartialEq)]
pub struct OutlierDecomposition {
    pub outlier_values: Vec<f64>,
    pub outlier_basis: SubspaceBasis,
    /// Magnitude of the most negative Ritz value, 0 when none is negative.
    pub bulk_variance_proxy: f64,
}

impl OutlierDecomposition {
    pub fn m(&self) -> usize {
        self.outlier_values.len()
    }
}

pub fn decompose(s: &SpectrumResult, m: usize) -> Result<OutlierDecomposition> {
    let values = s.ritz_values();
    if m > values.len() {
        return Err(Error::invalid(format!("{m} outliers requested from {} ritz values", values.len())));
    }
    if let Some((index, &value)) = values[..m].iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositiveOutlier { index, value });
    }
    let outlier_basis = if m == 0 {
        SubspaceBasis::new(DenseMatrix::zeros(0, s.operator_dim()))?
    } else {
        s.top_subspace(m)?
    };
    Ok(OutlierDecomposition {
        outlier_values: values[..m].to_vec(),
        outlier_basis,
        bulk_variance_proxy: bulk_variance_proxy(values),
    })
}

pub fn bulk_variance_proxy(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0f64, f64::min).abs()
}

/// `Σ_{λ>0} λ / (λ + α)`.
pub fn effective_dimensionality(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    Ok(values.iter().filter(|&&l| l > 0.0).map(|l| l / (l + alpha)).sum())
}

/// Outlier count from the largest ratio `λ_i / λ_{i+1}` among the top
/// `2 * classes` values. Only positive consecutive pairs are considered; falls
/// back to `classes` when no such pair exists.
pub fn spectral_gap_outliers(values: &[f64], classes: usize) -> usize {
    let window = (2 * classes).min(values.len());
    let mut best: Option<(usize, f64)> = None;
    for i in 0..window.saturating_sub(1) {
        let (a, b) = (values[i], values[i + 1]);
        if a <= 0.0 || b <= 0.0 {
            break;
        }
        let ratio = a / b;
        if best.is_none_or(|(_, r)| ratio > r) {
            best = Some((i + 1, ratio));
        }
    }
    best.map_or(classes, |(m, _)| m)
}
