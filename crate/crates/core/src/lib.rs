//! Numerical spectral geometry for the Lindblad-deformed Dirac operator on the
//! round unit two-sphere.
//!
//! The deformed operator is `Q = D² + γ² W₁ + γ⁴ W₂` with `W₁ = -i f c(df)` and
//! `W₂ = f⁴/4` for an axisymmetric scalar datum `f`. Everything is assembled in a
//! truncated spin-weighted harmonic basis, one dense block per azimuthal index
//! `m`, and consumed through heat traces `Tr exp(-σ Q)`, the Duhamel corrections
//! through order `γ⁴`, and the effective spectral dimension.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration files and
//! parallel orchestration live in the `spinheat` companion crate.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod basis;
mod error;
pub mod halfint;
pub mod heat;
pub mod linalg;
mod math;
pub mod operators;
pub mod sum;
pub mod validation;

pub use error::{Error, Result};
pub use halfint::HalfInt;
