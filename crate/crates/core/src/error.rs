use thiserror::Error;

use crate::cstar::AlgebraElement;

/// Errors raised while constructing or verifying algebraic objects.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("malformed element: {0}")]
    MalformedElement(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("not a *-homomorphism: {0}")]
    NotHomomorphism(String),

    #[error("structural inconsistency: {0}")]
    Structural(String),

    #[error("transfer identity fails on basis pair (a = e{a}, b = e{b}), residual {residual:.3e}")]
    IdentityViolation { a: usize, b: usize, residual: f64 },

    #[error("positivity fails: {what}")]
    PositivityFailure {
        what: String,
        witness: Box<AlgebraElement>,
    },

    #[error("non-degeneracy conditions disagree: alpha(L(1)) residual {unit_residual:.3e}, alpha∘L∘alpha residual {composite_residual:.3e}")]
    EquivalenceViolation {
        unit_residual: f64,
        composite_residual: f64,
    },

    #[error("range of the endomorphism is not hereditary (dim range {range_dim}, dim corner {corner_dim})")]
    NotHereditary { range_dim: usize, corner_dim: usize },

    #[error("singular solve: residual {residual:.3e} exceeds {bound:.3e}")]
    SingularSolve { residual: f64, bound: f64 },

    #[error("transfer operator is degenerate")]
    Degenerate,

    #[error("transfer operator is not the complete one")]
    NotComplete,

    #[error("conditional expectation axiom `{axiom}` fails, residual {residual:.3e}")]
    ExpectationAxiom { axiom: &'static str, residual: f64 },

    #[error("bimodule axiom `{axiom}` fails, residual {residual:.3e}")]
    BimoduleAxiom { axiom: &'static str, residual: f64 },

    #[error("element is not in the corner, residual {0:.3e}")]
    NotInCorner(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("isometries are not orthonormal (residual {0:.3e})")]
    NotIsometryFamily(f64),

    #[error("density matrix is not a state (trace {0})")]
    NotState(f64),

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("delta is empty")]
    EmptyDelta,
}

pub type Result<T> = std::result::Result<T, Error>;
