//! Band truncation and the `K × K` block partition of a symmetric matrix.
//!
//! Block indices are 0-based: block `(k, l)` covers rows
//! `k*K .. min((k+1)*K, p)` and columns `l*K .. min((l+1)*K, p)`, so when
//! `K` does not divide `p` the trailing blocks are ragged with `p mod K`
//! rows or columns.

use crate::error::{Error, Result};
use crate::linalg::matrix::{DenseMatrix, MatrixRef, SymMatrix};
use crate::linalg::norms::SpectralSolver;

/// Keeps `a_ij` when `|i − j| ≤ K − 1` and sets everything else to exactly 0.
pub fn band(a: &SymMatrix, bandwidth: usize) -> Result<SymMatrix> {
    if bandwidth < 1 {
        return Err(Error::arg("bandwidth must be at least 1"));
    }
    Ok(a.map_upper(|i, j, v| if j - i < bandwidth { v } else { 0.0 }))
}

/// True when every entry with `|i − j| ≥ K` is zero.
pub fn is_banded(a: &SymMatrix, bandwidth: usize) -> bool {
    let p = a.dim();
    (0..p).all(|i| ((i + bandwidth.max(1))..p).all(|j| a.get(i, j) == 0.0))
}

/// Number of blocks per side, `ceil(p / K)`.
pub fn block_count(dim: usize, block_size: usize) -> usize {
    dim.div_ceil(block_size)
}

fn block_range(dim: usize, block_size: usize, k: usize) -> std::ops::Range<usize> {
    let start = k * block_size;
    start..((k + 1) * block_size).min(dim)
}

/// Block `(k, l)` of the `K × K` partition (0-based block indices).
pub fn block<M: MatrixRef + ?Sized>(a: &M, k: usize, l: usize, block_size: usize) -> Result<DenseMatrix> {
    if block_size < 1 {
        return Err(Error::arg("block size must be at least 1"));
    }
    if a.nrows() != a.ncols() {
        return Err(Error::arg("block partition needs a square matrix"));
    }
    let nb = block_count(a.nrows(), block_size);
    if k >= nb || l >= nb {
        return Err(Error::arg(format!(
            "block ({k},{l}) out of range for {nb}x{nb} partition"
        )));
    }
    let rows = block_range(a.nrows(), block_size, k);
    let cols = block_range(a.nrows(), block_size, l);
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for i in rows.clone() {
        data.extend_from_slice(&a.row(i)[cols.clone()]);
    }
    DenseMatrix::from_row_major(rows.len(), cols.len(), data)
}

/// Matrix of block operator norms, entry `(k, l) = ‖A(k, l)‖_op`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNormMatrix {
    block_size: usize,
    norms: DenseMatrix,
}

impl BlockNormMatrix {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> usize {
        self.norms.nrows()
    }

    /// Largest block norm among blocks with `|k − l| ≤ 1`.
    pub fn max_near_diagonal(&self) -> f64 {
        let nb = self.blocks();
        let mut best = 0.0_f64;
        for k in 0..nb {
            for l in k.saturating_sub(1)..(k + 2).min(nb) {
                best = best.max(self.get(k, l));
            }
        }
        best
    }
}

impl MatrixRef for BlockNormMatrix {
    fn nrows(&self) -> usize {
        self.norms.nrows()
    }
    fn ncols(&self) -> usize {
        self.norms.ncols()
    }
    fn as_slice(&self) -> &[f64] {
        self.norms.as_slice()
    }
}

/// Compresses `a` into its matrix of block operator norms.
///
/// Only the upper block triangle is evaluated; the lower one is mirrored
/// since `‖Bᵀ‖_op = ‖B‖_op`. All-zero blocks map to an exact 0.
pub fn block_compress(a: &SymMatrix, block_size: usize) -> Result<BlockNormMatrix> {
    block_compress_with(a, block_size, &SpectralSolver::default())
}

pub fn block_compress_with(
    a: &SymMatrix,
    block_size: usize,
    solver: &SpectralSolver,
) -> Result<BlockNormMatrix> {
    if block_size < 1 {
        return Err(Error::arg("block size must be at least 1"));
    }
    let nb = block_count(a.dim(), block_size);
    let mut norms = DenseMatrix::zeros(nb, nb);
    for k in 0..nb {
        for l in k..nb {
            let b = block(a, k, l, block_size)?;
            let v = solver.norm(&b)?;
            norms.data_mut()[k * nb + l] = v;
            norms.data_mut()[l * nb + k] = v;
        }
    }
    Ok(BlockNormMatrix { block_size, norms })
}
