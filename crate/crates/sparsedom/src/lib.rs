//! Sparse domination of cube-indexed function families on discretized dyadic grids.
//!
//! The library builds η-sparse families by a local Calderón–Zygmund stopping time
//! for an arbitrary family `{f_Q, f_{P,Q}}` of cube-indexed functions, and verifies
//! the resulting pointwise, bilinear and good-λ inequalities with explicit,
//! machine-checked constants. Everything lives on a finite dyadic grid: a root cube
//! subdivided `L` times into leaf cells on which all functions are constant, so set
//! arithmetic, measures and rearrangements are exact.
//!
//! Module map:
//! - [`dyadic`] — cube addressing, contracting/sparse families, exact validation
//! - [`grid`] — leaf-cell-constant functions, rearrangements, oscillations, maximal operators
//! - [`family`] — the abstract cube family, its two hypotheses, sharp maximal functions
//! - [`engine`] — the stopping-time construction and domination reports
//! - [`poincare`] — polynomial projections and self-improving inequalities
//! - [`tent`] — discretized upper half-space, cone/Carleson functionals, tent domination
//! - [`square`] — cancellative kernels and the vertical square function
//! - [`sums`] — dyadic sums, nonlinear potentials and their good-λ inequality
//! - [`runner`] — deterministic experiment configs, reports and curve emission

pub mod dyadic;
pub mod engine;
pub mod family;
pub mod grid;
pub mod poincare;
pub mod rng;
pub mod runner;
pub mod square;
pub mod sums;
pub mod tent;

pub use dyadic::{ContractingFamily, DyadicCube, RootGeometry, SparseFamily};
pub use engine::{DominationReport, EngineParams};
pub use family::CubeFamily;
pub use grid::GridFunction;
