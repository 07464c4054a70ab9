//! Snapshot-based model reduction for stable discrete-time LTI systems.
//!
//! The crate implements four reduction pipelines over one shared data path
//! and cross-validates them against an exact balanced-truncation oracle:
//!
//! - **Balanced POD**: primal and adjoint impulse snapshots, the generalized
//!   Hankel matrix H = Y*X, and Petrov-Galerkin projection onto biorthogonal
//!   modes.
//! - **ERA**: the same reduced model realized from output data alone, with
//!   the Hankel matrix assembled from Markov parameters at a fraction of the
//!   inner-product cost.
//! - **ERA with pseudo-adjoint modes**: the pseudo-inverse surrogate for
//!   adjoint modes, which projects but does not balance.
//! - **POD/Galerkin**: the classical orthogonal-projection comparator.
//!
//! [`gramians`] carries the exact Lyapunov-based oracle and the
//! transformed-Gramian diagnostics that show which pipelines balance;
//! [`eval`] measures impulse errors, frequency responses, and Welch
//! spectral estimates; [`dmat`] fixes the on-disk matrix format.

pub mod dmat;
pub mod error;
pub mod eval;
pub mod gramians;
pub mod hankel;
pub(crate) mod linalg;
pub mod lti;
pub mod plant;
pub mod reduction;
pub mod sampling;

pub use error::{Error, Result};
pub use lti::StateSpaceModel;
pub use plant::PlantConfig;
pub use reduction::{ReducedModel, ReductionMethod};
