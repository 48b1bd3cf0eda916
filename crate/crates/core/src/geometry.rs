//! Principal angles, Grassmann distance and the misalignment score between
//! eigenvector subspaces.
//!
//! For orthonormal bases `P, Q` (rows span the subspaces) the singular values
//! of `P Qᵀ` are the cosines of the principal angles `φ_i`. From those:
//!
//! ```text
//! d_m     = sqrt(Σ φ_i²)
//! d̂_m     = d_m / (sqrt(m) π/2)          in [0, 1]
//! S(P, Q) = 1 - cos(π/2 · d̂_m)           in [0, 1]
//! ```

use std::f64::consts::FRAC_PI_2;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, thin_svd, DenseMatrix};

/// Orthonormal basis of an `m`-dimensional subspace of `R^N`, one basis
/// vector per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DenseMatrix,
    pub epoch_tag: Option<usize>,
    pub run_tag: Option<String>,
}

impl SubspaceBasis {
    /// Wraps `basis`, checking `basis · basisᵀ = I` to `1e-10`.
    pub fn new(basis: DenseMatrix) -> Result<Self> {
        let gram = basis.matmul_transpose(&basis)?;
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let gap = (gram[(i, j)] - expect).abs();
                if gap > 1e-10 {
                    return Err(Error::invalid(format!(
                        "subspace basis is not orthonormal: gram[{i},{j}] off by {gap:e}"
                    )));
                }
            }
        }
        Ok(Self {
            basis,
            epoch_tag: None,
            run_tag: None,
        })
    }

    pub fn with_epoch(mut self, epoch: usize) -> Self {
        self.epoch_tag = Some(epoch);
        self
    }

    pub fn with_run(mut self, run: impl Into<String>) -> Self {
        self.run_tag = Some(run.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.basis.row(i)
    }

    /// The subspace spanned by the first `m` basis vectors.
    pub fn leading(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.dim() {
            return Err(Error::invalid(format!(
                "cannot take {m} leading vectors of a {}-dimensional basis",
                self.dim()
            )));
        }
        let rows: Vec<&[f64]> = (0..m).map(|i| self.basis.row(i)).collect();
        Ok(Self {
            basis: DenseMatrix::from_rows(&rows)?,
            epoch_tag: self.epoch_tag,
            run_tag: self.run_tag.clone(),
        })
    }
}

fn check_compatible(p: &SubspaceBasis, q: &SubspaceBasis) -> Result<()> {
    check_len("subspace dimension", p.dim(), q.dim())?;
    check_len("subspace ambient dimension", p.ambient_dim(), q.ambient_dim())
}

/// Principal angles in radians, ascending.
///
/// Angles whose cosine exceeds `1/√2` are taken from the sines instead (the
/// singular values of the part of `Q` orthogonal to `P`), since `acos` loses
/// half the digits near 1.
pub fn principal_angles(p: &SubspaceBasis, q: &SubspaceBasis) -> Result<Vec<f64>> {
    check_compatible(p, q)?;
    let cross = p.basis().matmul_transpose(q.basis())?;
    let cosines = thin_svd(&cross)?.singular_values;

    // Q - (P Qᵀ)ᵀ P
    let mut residual = q.basis().clone();
    for j in 0..q.dim() {
        let row = residual.row_mut(j);
        for i in 0..p.dim() {
            let c = cross[(i, j)];
            for (r, pv) in row.iter_mut().zip(p.vector(i)) {
                *r -= c * pv;
            }
        }
    }
    let mut sines = thin_svd(&residual)?.singular_values;
    sines.reverse();

    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            if c > std::f64::consts::FRAC_1_SQRT_2 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.clamp(0.0, 1.0).acos()
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrassmannDistance {
    pub distance: f64,
    /// `distance / (sqrt(m) π/2)`, in `[0, 1]`.
    pub normalized: f64,
}

/// Grassmann distance. Symmetric bit for bit: the pair is put in a canonical
/// order before any arithmetic.
pub fn grassmann_distance(p: &SubspaceBasis, q: &SubspaceBasis) -> Result<GrassmannDistance> {
    let (a, b) = canonical_pair(p, q);
    let angles = principal_angles(a, b)?;
    let distance = angles.iter().map(|a| a * a).sum::<f64>().sqrt();
    let normalized = distance / ((angles.len() as f64).sqrt() * FRAC_PI_2);
    Ok(GrassmannDistance {
        distance,
        normalized: normalized.clamp(0.0, 1.0),
    })
}

fn canonical_pair<'a>(p: &'a SubspaceBasis, q: &'a SubspaceBasis) -> (&'a SubspaceBasis, &'a SubspaceBasis) {
    let order = p
        .basis()
        .as_slice()
        .iter()
        .zip(q.basis().as_slice())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal);
    if order.is_gt() {
        (q, p)
    } else {
        (p, q)
    }
}

/// Misalignment `S = 1 - cos(π/2 · d̂_m)`.
pub fn misalignment(p: &SubspaceBasis, q: &SubspaceBasis) -> Result<f64> {
    let d = grassmann_distance(p, q)?;
    Ok(misalignment_from_normalized(d.normalized))
}

pub fn misalignment_from_normalized(normalized: f64) -> f64 {
    (1.0 - (FRAC_PI_2 * normalized).cos()).clamp(0.0, 1.0)
}

/// `1 - |u·v| / (|u| |v|)`. Sign-blind, since eigenvectors carry no sign.
pub fn cosine_misalignment(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("cosine_misalignment", u.len(), v.len())?;
    let (uu, vv) = (dot(u, u), dot(v, v));
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    let c = (dot(u, v).abs() / (uu * vv).sqrt()).min(1.0);
    Ok(1.0 - c)
}

/// Pairwise misalignment of a sequence of snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<usize>,
    values: DenseMatrix,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Mean over entries with `i != j` among the given indices.
    pub fn mean_off_diagonal(&self, indices: &[usize]) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &i in indices {
            for &j in indices {
                if i != j {
                    sum += self.values[(i, j)];
                    count += 1;
                }
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}

/// `values[i][j] = S(snap_i, snap_j)`, computed for `i < j` and mirrored.
/// Labels are the snapshots' epoch tags (or positions when untagged).
pub fn similarity_matrix(snapshots: &[SubspaceBasis]) -> Result<SimilarityMatrix> {
    let Some(first) = snapshots.first() else {
        return Err(Error::invalid("similarity matrix of zero snapshots"));
    };
    for s in snapshots {
        check_compatible(first, s)?;
    }
    let n = snapshots.len();
    let mut values = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = misalignment(&snapshots[i], &snapshots[j])?;
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    let labels = snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| s.epoch_tag.unwrap_or(i))
        .collect();
    Ok(SimilarityMatrix { labels, values })
}
