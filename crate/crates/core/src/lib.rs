//! Geometry-adaptive compression of dense kernel matrices.
//!
//! The crate learns coupled row/column partition trees for a kernel matrix,
//! reorders both index sets along an affinity-guided space-filling curve, and
//! compresses the reordered matrix with a butterfly factorization or a 2-D
//! Haar-Walsh best basis. Both compressed forms provide fast matrix-vector
//! products.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub mod accounting;
pub mod butterfly;
pub mod eigen;
pub mod error;
pub mod ghwt;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod perm;
pub mod pipeline;
pub mod questionnaire;
pub mod rng;
pub mod scalar;
pub mod sfc;
pub mod tree;
pub mod treeaffinity;

pub use accounting::StorageCount;
pub use error::{Error, Result};
pub use matrix::{matvec, permute_matrix, DenseMatrix};
pub use perm::Permutation;
pub use rng::SeededRng;
pub use scalar::Scalar;

/// Double-precision dense matrix.
pub type Matrix = DenseMatrix<f64>;
/// Single-precision dense matrix.
pub type Matrix32 = DenseMatrix<f32>;
