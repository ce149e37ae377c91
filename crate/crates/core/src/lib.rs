//! Operator machinery for fractional three-point boundary value problems at
//! resonance.
//!
//! The problem solved here is
//!
//! ```text
//! D^α x(t) = f(t, x(t), D^(α-1) x(t)),   1 < α ≤ 2,  t ∈ [0, 1]
//! I^(2-α) x(0) = 0,                      x(1) = A x(ξ)
//! ```
//!
//! truncated to `n` components. Elements of the domain are carried as a pair
//! `(c, y)` with `x(t) = c t^(α-1) + I^α y(t)`, so the left boundary condition
//! and the trace `D^(α-1) x(0) = Γ(α) c` hold exactly.
//!
//! Module map:
//! - [`fracops`]: gamma, Riemann–Liouville integral/derivative on uniform grids.
//! - [`linops`]: pseudoinverse, Penrose checks, norms, kernel bases.
//! - [`resonance`]: `M = I - ξ^(α-1) A`, the functional `h`, projectors `P`, `Q`, and `K_P`.
//! - [`solver`]: the nonlinear operator `N`, the fixed-point map and its damped iteration.
//! - [`hypotheses`]: sampled checks of the growth, solvability and sign conditions.
//! - [`registry`]: built-in problems and golden-value verification.

pub mod check;
pub mod error;
pub mod fracops;
pub mod hypotheses;
pub mod linops;
pub mod registry;
pub mod resonance;
pub mod rhs;
pub mod solver;

pub use error::{Error, Result};
pub use fracops::{GridFn, Order, PowerFn, SplitFn};
pub use linops::LinOp;
pub use resonance::{build_resonance, DomainElement, ProblemSpec, ResonanceData};
pub use rhs::RightHandSide;
pub use solver::{solve, SolveOptions, SolveReport};
