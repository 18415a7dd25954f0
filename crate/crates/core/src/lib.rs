//! Engine for quantum and classical dynamics of statistical moments.
//!
//! A state is described by its phase-space centroid `(q, p)` together with
//! the centered moments `G[a,b]` (quantum, Weyl-ordered) or `C[a,b]`
//! (classical). This crate derives the coupled evolution equations of those
//! variables for arbitrary polynomial Hamiltonians, integrates them
//! numerically, generates the Cauchy-Schwarz inequality catalog that bounds
//! admissible moments (including the uncertainty relations), and solves the
//! stationary-state moment recursion.
//!
//! Module map:
//! * [`symcore`] — exact rational polynomials over moment symbols
//! * [`opalgebra`] — noncommutative words of centered operators, normal
//!   ordering, Weyl conversion
//! * [`brackets`] — closed-form Poisson brackets between moments, plus a
//!   first-principles commutator oracle
//! * [`eomgen`] — effective Hamiltonians and truncated equations of motion
//! * [`dynamics`] — RK4 integration and a particle-ensemble oracle
//! * [`inequalities`] — inequality generation, classification, reductions
//! * [`stationary`] — equilibrium systems and the stationary moment recursion

pub mod brackets;
pub mod dynamics;
pub mod eomgen;
pub mod inequalities;
pub mod opalgebra;
pub mod stationary;
pub mod symcore;

pub use symcore::{MomentKey, MomentKind, MomentPoly};
