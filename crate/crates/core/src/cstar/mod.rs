//! Finite-dimensional C*-algebras `⊕ M_{d_k}(C)`, their elements, ideals and
//! linear maps between them.

mod algebra;
mod map;
mod positivity;

pub use algebra::{AlgebraElement, BlockAlgebra, IdealBlocks, MatrixUnit, Tolerance};
pub(crate) use map::{require_homomorphism, Role};
pub use map::{
    homomorphism_residual, is_star_homomorphism, kernel_blocks, verify_star_homomorphism,
    OperatorMap, Roles,
};
pub use positivity::{
    choi_blocks, is_completely_positive, is_positive_element, is_positive_map, PositivityVerdict,
};
