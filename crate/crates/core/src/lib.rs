//! Relaxation-based shifted-basis discretization of 1D scalar conservation laws
//! on the periodic domain `[-1, 1)`, together with its projection-based
//! model-order reduction and the reference solvers used to validate it.
//!
//! The conservation law `u_t + f(u)_x = 0` is replaced by the Jin–Xin
//! relaxation system, whose diagonal variables `w± = v ± λu` are transported
//! at the fixed speeds `±λ`. Each `w±` is expanded in hat functions that travel
//! with its characteristic speed, so the coefficients only evolve through the
//! stiff relaxation source. The resulting coefficient system is stepped with a
//! semi-implicit (or fully explicit) scheme whose mass operators are circulant.
//!
//! Modules:
//! - [`basis`]: torus geometry, translated basis family, quadrature.
//! - [`circulant`]: circulant algebra via the DFT, rank-1 corrected solves.
//! - [`massop`]: time-dependent overlap matrices `M(t)`, `Ṁ(t)` and their singular times.
//! - [`fom`]: the full-order coefficient model and its time steppers.
//! - [`rom`]: snapshots, POD bases and the Galerkin-projected reduced model.
//! - [`reference`]: analytic solutions, finite-volume relaxation solver, norms.

pub mod basis;
pub mod circulant;
mod error;
pub mod fom;
pub mod massop;
pub mod par;
pub mod profiles;
pub mod reference;
pub mod rom;

pub use error::{Error, Result};
