//! Random motions with a finite set of velocities.
//!
//! A particle moves in R^D with a velocity picked from `v_0, ..., v_M`,
//! switching at the events of a counting process. The crate simulates such
//! motions, evaluates the exact law of the position (inner density, densities
//! on the faces of the support, point masses), and checks the governing PDEs
//! numerically.

pub mod analytic;
pub mod compare;
pub mod error;
pub mod general_motion;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod pde;
pub mod polytope;
pub mod quadrature;
pub mod simulator;
pub mod special;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use geometry::{ProjectionMap, RegionClassification, RegionKind, VelocitySet};
pub use model::{EventClock, MotionModel};
pub use stochastic::{RateFunction, SwitchKernel, WaitingLaw, WaitingTimeModel};
