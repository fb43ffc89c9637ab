//! Model-reduction toolkit for Michaelis-Menten enzyme kinetics.
//!
//! The irreversible enzyme reaction `X + E <-> C -> X_p + E` admits two
//! classical quasi-steady-state reductions: the standard one (sQSSA), which
//! closes the complex in the original substrate variable, and the total one
//! (tQSSA), which closes it in the lumped variable `Xbar = X + C`. Both are
//! Tihonov reduced systems of a singularly perturbed formulation, and both
//! are asymptotically equivalent to the second-order center manifold of the
//! associated inner system. This crate provides the machinery to compute all
//! three descriptions and to cross-validate them numerically:
//!
//! - [`kinetics`]: dimensional parameters, derived constants, the two
//!   nondimensionalizations, conservation-law residuals;
//! - [`ode`]: adaptive explicit (embedded 4(5) pair) and stiff-capable
//!   implicit (step-doubled, extrapolated backward Euler) integration with
//!   dense output;
//! - [`models`]: right-hand sides of every system, dimensional and
//!   nondimensional, outer and inner time, plus the generic singularly
//!   perturbed container with its `w = a*u + b*v` block coordinates;
//! - [`qssa`]: algebraic roots, reduced one-dimensional ODEs, and the
//!   Newton-based Tihonov root finder;
//! - [`manifold`]: second-order center-manifold coefficients (closed forms
//!   and the general formula), the invariance-equation residual, reduced
//!   vector fields, and asymptotic-equivalence reports;
//! - [`tihonov`]: domain-of-influence and mu-tube checks, epsilon-convergence
//!   sweeps, the slow-phase `E*X/C` asymptote, and approximation metrics.

pub mod error;
pub mod kinetics;
pub mod manifold;
pub mod models;
pub mod numeric;
pub mod ode;
pub mod qssa;
pub mod tihonov;

pub use error::Error;
