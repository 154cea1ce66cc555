//! Transfer operators for *-endomorphisms of finite-dimensional C*-algebras.
//!
//! The crate works with algebras `⊕_k M_{d_k}(C)` and linear maps between
//! them stored as coordinate matrices. It verifies and constructs transfer
//! operators `Λ` with `Λ(α(a) b) = a Λ(b)`, relates the non-degenerate ones
//! to conditional expectations onto `α(A)`, and treats two model families in
//! detail: partial maps on finite sets and isometry families.

pub mod bh;
pub mod bimodule;
pub mod commutative;
pub mod corpus;
pub mod cstar;
pub mod error;
pub mod linalg;
pub mod transfer;

pub use cstar::{AlgebraElement, BlockAlgebra, OperatorMap, Tolerance};
pub use error::{Error, Result};
pub use transfer::{ConditionalExpectation, TransferOperator};
