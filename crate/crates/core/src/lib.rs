//! Decision procedures, kernel constructions and operator-norm experiments for
//! multi-parameter singular Radon transforms.
//!
//! Two families of curves are supported:
//!
//! * translation-invariant flows on the real line, `γ_t(x) = x − p(t)`;
//! * left-invariant flows on the first Heisenberg group,
//!   `γ_s(ξ) = exp(P₁(s)X + P₂(s)Y + P₃(s)T)·ξ`.
//!
//! For both families the boundedness question reduces to a finite check on the
//! exponent set of the polynomials involved ([`criteria`]). The remaining
//! modules build the objects the analysis talks about: dilation algebra
//! ([`dilations`]), exact polynomial vector fields ([`symbolic`]), moment
//! bumps ([`bumps`]), dyadic kernel sequences ([`kernels`]) and a grid
//! discretization used to watch operator norms grow or stay bounded
//! ([`harness`]).

pub mod bumps;
pub mod compensated;
pub mod criteria;
pub mod dilations;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod quadrature;
pub mod symbolic;

pub use error::{Error, Result};

/// Exact rational scalar used throughout the symbolic and criteria paths.
pub type Rational = num_rational::BigRational;
