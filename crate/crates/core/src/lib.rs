//! Convex surfaces in hyperbolic 3-space, their de Sitter duals, projective
//! models, infinitesimal rigidity and prescribed-metric realization.

pub mod deform;
pub mod dual;
pub mod error;
pub mod flows;
pub mod geodesic;
pub mod grid;
pub mod io;
pub mod lorentz;
pub mod projective;
pub mod realize;
pub mod report;
pub mod sample;
pub mod sparse;
pub mod spline;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
