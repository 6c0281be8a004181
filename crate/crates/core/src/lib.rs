//! Numerical Hardy-space toolkit for non-negative self-adjoint operators
//! with Gaussian heat-kernel bounds on finite grids.
//!
//! The crate builds discrete operators L (laplacian, Schrödinger, magnetic
//! Schrödinger), exposes the spectral functional calculus F(t√L), computes
//! the maximal and square functions that norm H^p spaces for 0 < p ≤ 1,
//! checks the kernel estimates the theory rests on, and runs a constructive
//! atomic decomposition with a (p, q, M)-atom validator.
//!
//! Modules follow the pipeline:
//!
//! - [`grid`] — grids, fields, cubes, L^p quasi-norms
//! - [`quad`] — Gauss-Legendre rules
//! - [`symbols`] — the bump φ, its transform Φ, Ψ, η, c_Ψ, seminorms
//! - [`operator`] — operators, F(t√L), kernels, Gaussian fits, Kato norm
//! - [`multiplier`] — finite propagation / sup / weighted-L² / cross-scale checkers
//! - [`maximal`] — S_L, f*_L, f⁺_L, Peetre, grand maximal, 𝓜_L
//! - [`decomposition`] — level sets, Whitney cubes, tents, Calderón
//!   reconstruction, atomic decomposition, atom validation
//! - [`oracle`] — independent reference paths used by tests
//! - [`io`] — CSV and raw-array dumps

pub mod error;
pub mod grid;
pub mod io;
pub mod maximal;
pub mod multiplier;
pub mod operator;
pub mod oracle;
pub mod quad;
pub mod symbols;

pub mod decomposition;

pub use error::{Error, Result};
pub use grid::{lp_quasinorm, Boundary, Cube, DilatedCube, Field, GridSpec, Point};
pub use operator::{build_operator, kato_norm, OperatorKind, SpectralOperator};
pub use symbols::{dictionary_seminorm, fourier_symbol, make_bump, make_eta, CalderonBundle, Symbol};
