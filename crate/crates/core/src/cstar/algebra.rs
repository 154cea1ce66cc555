use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Range, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_residual, CMat, CVec, Subspace, ZERO};

/// Numerical tolerances shared by every verification routine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Equality of elements and maps.
    pub eq_tol: f64,
    /// Allowed negativity of eigenvalues in positivity tests.
    pub psd_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eq_tol: 1e-9,
            psd_tol: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(eq_tol: f64, psd_tol: f64) -> Result<Self> {
        for (name, v) in [("eq_tol", eq_tol), ("psd_tol", psd_tol)] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(Error::InvalidTolerance(format!("{name} = {v} must lie in (0, 1e-4]")));
            }
        }
        Ok(Tolerance { eq_tol, psd_tol })
    }
}

/// A matrix unit `E_{row,col}` of one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixUnit {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

/// The algebra `M_{d_1}(C) ⊕ ... ⊕ M_{d_m}(C)`.
///
/// Coordinates are taken with respect to the matrix units, block by block,
/// each block in row-major order.
#[derive(Clone, PartialEq, Eq)]
pub struct BlockAlgebra {
    dims: Arc<[usize]>,
    offsets: Arc<[usize]>,
    dim: usize,
}

impl fmt::Debug for BlockAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockAlgebra{:?}", &*self.dims)
    }
}

impl BlockAlgebra {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::ShapeMismatch("block algebra needs at least one block".into()));
        }
        if block_dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch("block dimensions must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(block_dims.len());
        let mut acc = 0;
        for &d in &block_dims {
            offsets.push(acc);
            acc += d * d;
        }
        Ok(BlockAlgebra {
            dims: block_dims.into(),
            offsets: offsets.into(),
            dim: acc,
        })
    }

    /// `C(X)` for an `n`-point space.
    pub fn commutative(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn full_matrix(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn block_dim(&self, k: usize) -> usize {
        self.dims[k]
    }

    /// Total coordinate dimension `sum d_k^2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_commutative(&self) -> bool {
        self.dims.iter().all(|&d| d == 1)
    }

    pub fn block_range(&self, k: usize) -> Range<usize> {
        let start = self.offsets[k];
        start..start + self.dims[k] * self.dims[k]
    }

    pub fn index_of(&self, unit: MatrixUnit) -> usize {
        let d = self.dims[unit.block];
        debug_assert!(unit.row < d && unit.col < d);
        self.offsets[unit.block] + unit.row * d + unit.col
    }

    pub fn unit_at(&self, index: usize) -> MatrixUnit {
        assert!(index < self.dim, "basis index {index} out of range");
        // offsets are strictly increasing because every d_k > 0
        let block = match self.offsets.binary_search(&index) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let d = self.dims[block];
        let local = index - self.offsets[block];
        MatrixUnit {
            block,
            row: local / d,
            col: local % d,
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.dims.iter().map(|&d| CMat::zeros(d, d)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.dims.iter().map(|&d| CMat::identity(d, d)).collect(),
        }
    }

    /// The matrix unit with coordinate index `index`.
    pub fn basis_element(&self, index: usize) -> AlgebraElement {
        let u = self.unit_at(index);
        let mut e = self.zero();
        e.blocks[u.block][(u.row, u.col)] = Complex64::new(1.0, 0.0);
        e
    }

    pub fn basis(&self) -> impl Iterator<Item = AlgebraElement> + '_ {
        (0..self.dim).map(|i| self.basis_element(i))
    }

    /// Sum of the block identities over `blocks`.
    pub fn block_unit(&self, blocks: &BTreeSet<usize>) -> AlgebraElement {
        let mut e = self.zero();
        for &k in blocks {
            let d = self.dims[k];
            e.blocks[k] = CMat::identity(d, d);
        }
        e
    }
}

/// An element of a [`BlockAlgebra`].
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    algebra: BlockAlgebra,
    blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn new(algebra: &BlockAlgebra, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::MalformedElement(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (b, &d)) in blocks.iter().zip(algebra.block_dims()).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::MalformedElement(format!(
                    "block {k} is {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(AlgebraElement {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn from_coords(algebra: &BlockAlgebra, coords: &[Complex64]) -> Result<Self> {
        if coords.len() != algebra.dim() {
            return Err(Error::MalformedElement(format!(
                "expected {} coordinates, got {}",
                algebra.dim(),
                coords.len()
            )));
        }
        let blocks = (0..algebra.num_blocks())
            .map(|k| {
                let d = algebra.block_dim(k);
                CMat::from_row_slice(d, d, &coords[algebra.block_range(k)])
            })
            .collect();
        Ok(AlgebraElement {
            algebra: algebra.clone(),
            blocks,
        })
    }

    /// Element of `C(X)` from its point values.
    pub fn from_function(algebra: &BlockAlgebra, values: &[f64]) -> Result<Self> {
        if !algebra.is_commutative() {
            return Err(Error::ShapeMismatch("function values need a commutative algebra".into()));
        }
        let coords: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_coords(algebra, &coords)
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn coords(&self) -> CVec {
        let mut v = CVec::zeros(self.algebra.dim());
        for (k, b) in self.blocks.iter().enumerate() {
            let d = b.nrows();
            let off = self.algebra.block_range(k).start;
            for r in 0..d {
                for c in 0..d {
                    v[off + r * d + c] = b[(r, c)];
                }
            }
        }
        v
    }

    pub fn adjoint(&self) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    /// Euclidean norm of the coordinate vector.
    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// The C*-norm: largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| hermitian_eigen(&(b.adjoint() * b)).max().max(0.0).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &AlgebraElement) -> f64 {
        (self - other).frobenius_norm()
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.blocks.iter().map(hermitian_residual).fold(0.0, f64::max)
    }

    /// Commutator residual `||x a - a x||` against every matrix unit.
    pub fn centrality_residual(&self) -> f64 {
        // x E_ij - E_ij x vanishes for all units iff each block is scalar
        let mut worst = 0.0f64;
        for b in &self.blocks {
            let d = b.nrows();
            let mean = crate::linalg::trace(b) / Complex64::new(d as f64, 0.0);
            for r in 0..d {
                for c in 0..d {
                    let target = if r == c { mean } else { ZERO };
                    worst = worst.max((b[(r, c)] - target).norm());
                }
            }
        }
        worst
    }

    fn zip_with(&self, rhs: &AlgebraElement, f: impl Fn(&CMat, &CMat) -> CMat) -> AlgebraElement {
        assert_eq!(self.algebra, rhs.algebra, "elements of different algebras");
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// A two-sided ideal, i.e. a sum of full blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealBlocks {
    algebra: BlockAlgebra,
    blocks: BTreeSet<usize>,
}

impl IdealBlocks {
    pub fn new(algebra: &BlockAlgebra, blocks: impl IntoIterator<Item = usize>) -> Result<Self> {
        let blocks: BTreeSet<usize> = blocks.into_iter().collect();
        if let Some(&k) = blocks.iter().find(|&&k| k >= algebra.num_blocks()) {
            return Err(Error::ShapeMismatch(format!("block index {k} out of range")));
        }
        Ok(IdealBlocks {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &BTreeSet<usize> {
        &self.blocks
    }

    pub fn contains_block(&self, k: usize) -> bool {
        self.blocks.contains(&k)
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The ideal of the blocks not in `self`; in a block algebra this is the annihilator.
    pub fn complement(&self) -> IdealBlocks {
        IdealBlocks {
            algebra: self.algebra.clone(),
            blocks: (0..self.algebra.num_blocks())
                .filter(|k| !self.blocks.contains(k))
                .collect(),
        }
    }

    /// The unit of the ideal, a central projection.
    pub fn unit(&self) -> AlgebraElement {
        self.algebra.block_unit(&self.blocks)
    }

    /// Coordinate dimension `sum_{k in S} d_k^2`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|&k| self.algebra.block_dim(k).pow(2)).sum()
    }

    /// Coordinate indices of the ideal, ascending.
    pub fn coordinates(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|&k| self.algebra.block_range(k)).collect()
    }

    pub fn subspace(&self) -> Subspace {
        Subspace::coordinate(self.algebra.dim(), &self.coordinates())
    }
}
