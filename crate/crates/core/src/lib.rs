//! Scale-matrix estimation for elliptical multivariate linear models.
//!
//! The crate covers the whole pipeline used by the `scalemat` experiments:
//!
//! - [`matrix`]: dense symmetric primitives (Σ builders, square roots,
//!   truncated eigendecomposition, Moore–Penrose inverse).
//! - [`model`]: Gaussian and Student-t (inverse-gamma variance mixture)
//!   sampling, the constant `K*`, and the canonical reduction of `Y = Xβ + E`.
//! - [`estimators`]: the usual estimators `a·S` and the orthogonally invariant
//!   family `a₀·H·L·(I + Ψ(L))·Hᵀ` with its ψ-families and improvement bounds.
//! - [`risk`]: data-based and quadratic losses, paired Monte-Carlo risk and PRIAL.
//! - [`identity`]: numerical checks of the orthogonally invariant Stein–Haff
//!   identity and of the `g(Ψ)` risk-difference bound.
//! - [`experiments`]: the sweep drivers and the verification suite behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod identity;
pub mod matrix;
pub mod model;
pub mod risk;

pub use error::{Error, Result};
pub use estimators::{EstimatorSpec, ShrinkagePsi, SpectralWeight};
pub use matrix::{EigenSystem, SigmaKind, SigmaSpec};
pub use model::{CanonicalSample, ModelSpec};
pub use risk::{LossKind, PrialReport, SigmaContext};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
