//! Dense linear algebra for the small matrices the spectral and geometry code
//! needs: tridiagonal eigenproblems, thin SVDs, and a Jacobi reference
//! eigensolver.

mod jacobi;
mod matrix;
mod rng;
mod tridiag;

pub use jacobi::{dense_sym_eig_oracle, thin_svd, Svd};
pub use matrix::{axpy, dot, norm, orthonormalize_rows, scale, DenseMatrix};
pub use rng::{derive_seed, seeded_gaussian_vector, seeded_rng, standard_normal, SeededRng};
pub use tridiag::{symtridiag_eig, TridiagonalSystem};
