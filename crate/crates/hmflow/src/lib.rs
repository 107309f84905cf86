//! Harmonic map heat flow from the plane into hyperbolic 3-space.
//!
//! The pipeline: a twisted ideal polygon is straightened to a planar one,
//! a planar harmonic map asymptotic to the straightened polygon is produced
//! by flowing a collapse-style initial guess, the twisted initial map is
//! rebuilt from it by rotation interpolation, and the 3D flow plus
//! diagnostics verify the expected invariants (tension decay, hull trapping,
//! pleated-plane distance bounds, polynomial Hopf differentials).

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod hyp3;
pub mod initmap;
pub mod io;
pub mod pipeline;
pub mod planar;
pub mod polygon;
pub mod qd;

pub use error::{Error, Result};
