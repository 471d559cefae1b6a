use alloc::string::String;
use alloc::vec::Vec;

use crate::HalfInt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("Newton iteration for Gauss-Legendre node {node} of {order} did not converge")]
    QuadratureNoConvergence { node: usize, order: usize },

    #[error("no basis states for m = {m} at truncation N = {n_trunc}")]
    EmptyBlock { m: HalfInt, n_trunc: usize },

    #[error("spin weight must be +1/2 or -1/2, got {0}")]
    InvalidSpin(HalfInt),

    #[error("Wigner recursion produced a non-finite value at j = {j}, node {node}")]
    RecursionOverflow { j: HalfInt, node: usize },

    #[error("quadrature rule has {found} nodes, at least {required} are needed")]
    RuleTooSmall { required: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("eigensolver did not converge for a {size}x{size} matrix (off-diagonal residual {residual:e})")]
    EigenNoConvergence { size: usize, residual: f64 },

    #[error("least-squares design of degree {degree} on {count} points is rank deficient")]
    RankDeficient { degree: usize, count: usize },

    #[error("phi2 argument {0} overflows")]
    Phi2Overflow(f64),

    #[error("sigma values violate the truncation-tail rule: {0:?}")]
    WindowViolation(Vec<f64>),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
