//! Sticky-particle (adhesion) dynamics for the one-dimensional pressureless
//! Euler system.
//!
//! Probability measures on the line are represented by their quantile
//! functions, i.e. nondecreasing step functions on `[0,1)`. In these Lagrangian
//! coordinates the sticky-particle evolution is the `L²` projection of free
//! flight onto the cone of nondecreasing functions:
//!
//! ```text
//! X(t) = Proj_K(X₀ + t·V₀),    V(t) = Proj_{H_X(t)}(V₀)
//! ```
//!
//! The crate computes that projection exactly and cross-checks it against an
//! event-driven particle simulation, Hopf/Legendre formulas for the Eulerian
//! CDF, a Godunov scheme, and the Wasserstein gradient flow of the
//! (opposite) squared distance.
//!
//! Module map:
//!
//! - [`step_fn`]: step functions, piecewise-linear primitives, convex
//!   envelopes, Legendre conjugates, `L^p` distances
//! - [`cone`]: projection onto nondecreasing functions, plateaus, polar cone
//!   and subdifferential tests
//! - [`measures`]: discrete measures with velocity, quantiles, Wasserstein
//!   and phase-space distances
//! - [`particles`]: event-driven sticky particle system
//! - [`semigroup`]: the Lagrangian semigroup and its identities
//! - [`eulerian`]: flux function, Hopf formula, Godunov oracle
//! - [`gradflow`]: gradient flow of `−½W₂²(·, σ)`, EVI, limit construction
//! - [`scenario`], [`harness`]: scenario files, verification suites,
//!   benchmarks, and the artifacts written by the `adhesion1d` binary

// `!(x > 0.0)` is deliberate: it rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod error;
pub mod eulerian;
pub mod gradflow;
pub mod harness;
pub mod measures;
pub mod particles;
pub mod rng;
pub mod scenario;
pub mod semigroup;
pub mod step_fn;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, MassVelocityState};
pub use particles::ParticleSystem;
pub use semigroup::LagrangianState;
pub use step_fn::{PwLinearFn, StepFn};
