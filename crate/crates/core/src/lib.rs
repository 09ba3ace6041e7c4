//! inman: numerical exploration of attracting invariant sets for
//! spectrally truncated semilinear evolution equations `u' + Au = F(u)`.
//!
//! Two constructions are built and cross-validated:
//!
//! * the forward limit of graph transforms: evolve the flat manifold
//!   `q = 0` and track the Cauchy convergence of its Q-sections;
//! * the backward-bounded set: solve two-point boundary value problems by
//!   shooting to approximate solutions whose Q-part stays bounded on the
//!   backward half-line, giving a set-valued map `Φ` from P- to
//!   Q-coordinates.
//!
//! The `estimates` module carries the dichotomy-type constants tying the
//! two together, and `analysis` provides the set metrics and conformance
//! experiments. Everything is driven by deterministic, seeded configs (see
//! the `experiment` module and the `inman` binary).

pub mod analysis;
pub mod backward;
pub mod error;
pub mod estimates;
pub mod experiment;
pub mod flow;
pub mod forward;
pub mod presets;
pub mod problem;
pub mod report;
pub mod state;

pub use error::{Error, Result};
pub use problem::{NonlinearityKind, NonlinearitySpec, SpectralProblem};
pub use state::StateVector;
