//! Majorized ADMM with indefinite proximal terms for linearly constrained
//! 2-block convex composite optimization
//!
//!   min  p(x) + f(x) + q(y) + g(y)   s.t.  A* x + B* y = c
//!
//! with p, q closed proper convex (possibly nonsmooth) and f, g smooth convex
//! with known curvature bounds. The solver alternates majorized proximal
//! subproblems in x and y and a multiplier update with step length
//! tau in (0, (1+sqrt(5))/2), where the proximal operators S and T are
//! allowed to be indefinite as long as the combined subproblem metrics stay
//! positive semidefinite.
//!
//! The crate ships:
//! - operator/spectral utilities ([`operator`]),
//! - the problem model with exact KKT residual measures ([`problem`]),
//! - majorized surrogates and spectral-truncation majorizers ([`majorization`]),
//! - proximal-term construction strategies and convergence-condition
//!   verification ([`strategy`]),
//! - the solver loop with safeguarded restarts and ergodic averaging
//!   ([`solver`]),
//! - convergence diagnostics ([`diagnostics`]),
//! - a seeded benchmark-instance generator and benchmark runner
//!   ([`instance`], [`bench`]),
//! - high-accuracy reference oracles used by the test suite ([`oracle`]).

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod majorization;
pub mod operator;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod sparse;
pub mod strategy;

pub use error::{Result, SolverError};
