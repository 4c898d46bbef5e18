//! Dense symmetric-matrix container and the norm and block-structure
//! primitives the estimators are built on.

mod factor;
mod matrix;
mod norms;
mod structure;

pub use factor::{cholesky, log_det_pd, sqrt_psd, symmetric_eigen, SymEigen};
pub use matrix::{DenseMatrix, MatrixRef, SymMatrix};
pub use norms::{
    frob_norm, max_abs_row_sum, op_norm, op_norm_default, SpectralSolver, SpectralEstimate,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use structure::{
    band, block, block_compress, block_compress_with, block_count, is_banded, BlockNormMatrix,
};
