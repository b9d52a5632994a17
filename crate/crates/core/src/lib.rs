//! Numerical toolkit for nonautonomous semilinear parabolic Cauchy problems
//!
//! ```text
//! D_t u = A(t)u + ψ(t, u),   A(t) = Tr(Q(t,x) D²) + ⟨b(t,x), ∇⟩,   u(s) = f
//! ```
//!
//! with possibly unbounded coefficients. Three independent backends realize
//! the evolution operator `G(t,s)`:
//!
//! * [`ou`]: closed-form Gaussian kernels for Ornstein–Uhlenbeck coefficients,
//!   together with the tight evolution system of measures `μ_t`;
//! * [`grid`]: θ-scheme finite differences for the Dirichlet problem on a box,
//!   with Lyapunov-controlled truncation;
//! * [`mc`]: Euler–Maruyama / Feynman–Kac Monte Carlo with per-path
//!   reproducible random streams.
//!
//! [`semilinear`] builds mild solutions by Picard iteration on top of the
//! first two, and [`verify`] turns the quantitative estimates (contraction,
//! invariance, gradient smoothing, decay, hypercontractivity) into
//! self-contained [`verify::EstimateReport`]s.

pub mod cli;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod mc;
pub mod ou;
pub mod problem;
pub mod quadrature;
pub mod semilinear;
pub mod verify;

pub use error::{Error, Result};
pub use problem::{
    CoefficientField, LyapunovCertificate, ProblemSpec, SemilinearTerm, SmoothField, TimeInterval,
};
