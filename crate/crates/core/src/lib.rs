//! Partitioned Gauss-Seidel solvers for stochastic coupled problems whose
//! exchanged random data are compressed by a weighted Karhunen-Loeve
//! decomposition of their polynomial-chaos representation.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or the clock lives in the companion `pckl` crate,
//! which plugs in through the [`exec::Executor`] trait.
//!
//! Module map:
//!
//! * [`linalg`]: dense and symmetric banded matrices, Cholesky, Jacobi eigensolver.
//! * [`fem`]: 1D linear finite elements, reactor operators, the H¹ Gram matrix.
//! * [`basis`] / [`quadrature`]: Legendre chaos basis, Smolyak sparse grids,
//!   nonintrusive projection.
//! * [`field`]: the random thermal-transmittivity field.
//! * [`kl`]: weighted KL decomposition of PC vectors.
//! * [`solver`]: deterministic and PC Gauss-Seidel iterations, with and without reduction.
//! * [`synthetic`]: a small linear two-subproblem fixture with combined reductions.
//! * [`mc`]: Monte Carlo reference sampling and surrogate error estimators.
//! * [`analysis`]: convergence, distance and contraction diagnostics.
#![cfg_attr(not(test), no_std)]
// NaN must fail validation, so `!(x > 0.0)` is intended; numeric kernels index by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod basis;
pub mod error;
pub mod exec;
pub mod fem;
pub mod field;
pub mod kl;
pub mod linalg;
pub mod mc;
pub mod quadrature;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
