//! Numerical toolkit for the weighted inhomogeneous Cauchy–Riemann equation ∂̄u = f.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] describes Ω, its exhaustion (Ω_n) and sampling lattices;
//! * [`weights`] holds the weight families ν_n, index maps and condition checkers;
//! * [`field`] and [`calculus`] provide sampled fields, finite differences and seminorms;
//! * [`fundsol`] evaluates the damped fundamental solution and its integral bounds;
//! * [`transform`] builds cutoffs, the Cauchy transform and the local solve;
//! * [`hormander`] realises the weighted L² step with a polynomial projection;
//! * [`mittag_leffler`] glues level-wise solutions with holomorphic corrections;
//! * [`vecvalued`] applies the scalar pipeline componentwise to ℂ^k-valued data.

pub mod calculus;
pub mod domain;
pub mod error;
mod fft;
pub mod field;
pub mod fundsol;
pub mod hormander;
pub mod mittag_leffler;
pub mod oracle;
pub mod quadrature;
pub mod transform;
pub mod vecvalued;
pub mod weights;

pub use error::{Error, Result};
