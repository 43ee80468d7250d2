//! Singular optimal control of the inverted spherical pendulum under a
//! bounded planar force: Hamiltonian extremal flows, closed-form
//! logarithmic-spiral solutions, blow-up desingularization of the origin,
//! the periodic cycle on the blown-up cylinder, and its Floquet analysis.
//!
//! Module map:
//! - [`numkit`]: adaptive integration, dense output, events, Jacobians,
//!   eigen-decomposition.
//! - [`pendulum`]: the physical model and its upright linearization.
//! - [`pmp`]: extremal flows of the maximum principle, feedback control,
//!   cost, singular-arc detection.
//! - [`spiral`]: the closed-form logarithmic-spiral family and seeds.
//! - [`blowup`]: the desingularizing change of variables and the blown-up
//!   flows on the cylinder.
//! - [`floquet`]: hyperbolicity of the cycle via a co-rotating frame.
//! - [`checks`]: the verification suite run by `spiralctl verify` and the
//!   acceptance test target.

pub mod blowup;
pub mod checks;
pub mod floquet;
pub mod numkit;
pub mod pendulum;
pub mod pmp;
pub mod spiral;
pub mod types;

pub use types::{KMatrix, Planar, ZState};
