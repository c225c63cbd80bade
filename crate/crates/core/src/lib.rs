//! Light-like generators (LLGs) of brick-wall quantum circuits.
//!
//! The crate builds the two-site gate models used to study operator spreading
//! (integrable, Haar-random, random-phase, three-parameter, dual-unitary and
//! localized circuits), folds four copies of the circuit into a replicated
//! space, and assembles the left- and right-moving transfer operators that act
//! along the light-like directions of the circuit. From these it computes
//! out-of-time-order correlators (OTOCs), their leading-singular-value
//! approximation, spectra and multiplicities of the generators, and the
//! closed-form results available for the ensemble-averaged Haar circuit and
//! the dual-unitary and localized special cases.
//!
//! Module map:
//!
//! - [`gates`]: gate models, circular-ensemble samplers, per-position seeding.
//! - [`replica`]: pair states, replicated gates, generalized Pauli matrices.
//! - [`llg`]: matrix-free light-like generators on replica vectors.
//! - [`spectral`]: singular triplets, dense spectra, Arnoldi, tail fits.
//! - [`otoc`]: OTOCs via LLGs, brute-force Heisenberg evolution, LSVA.
//! - [`analytic`]: Weingarten calculus and closed-form oracles.
//! - [`levelstats`]: Floquet level-spacing statistics.

pub mod analytic;
pub mod gates;
pub mod levelstats;
pub mod linalg;
pub mod llg;
pub mod otoc;
pub mod replica;
pub mod spectral;

use num_complex::Complex64;

pub use num_complex;

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model {model} requires q = {required}, got q = {got}")]
    WrongQ {
        model: &'static str,
        required: usize,
        got: usize,
    },

    #[error("invalid model parameters: {0}")]
    BadParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem too large: {what} needs dimension {dim}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("light cone clipped: chain of {chain} sites cannot hold t = {t} around x = {x}")]
    LightConeClipped { chain: usize, t: usize, x: i64 },

    #[error("{method} did not converge after {iterations} iterations (last change {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("tail fit needs at least {needed} usable points, got {got}")]
    InsufficientTail { needed: usize, got: usize },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("operator does not commute with the declared symmetry (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
