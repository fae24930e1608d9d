//! Hybrid mechanical systems with elastic impacts.
//!
//! Natural mechanical systems (metric, potential, linear velocity
//! constraints) whose trajectories reflect off impact surfaces. The crate
//! provides the impact maps, an event-driven hybrid integrator, sampled
//! checks of differential-form invariance, a catalog of reference systems
//! and histogram statistics for ensembles.
//!
//! The crate is `no_std` with `alloc`.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod diff;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod impacts;
pub mod linalg;
pub mod stats;
pub mod system;
pub mod zoo;

pub use error::{Error, Result};
pub use geometry::{
    ChartSpec, ConstraintSet, DerivativeMode, Frame, ImpactSurface, MechanicalSystem, MetricField,
    SmoothScalarField,
};
