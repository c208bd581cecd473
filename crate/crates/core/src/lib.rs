//! Immersed isogeometric analysis for multi-material heat conduction and
//! plane-strain elasticity in two dimensions.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`splines`]: open uniform B-spline bases, tensor products and Lagrange extraction.
//! * [`geometry`]: level-set functions, phase indices and material tables.
//! * [`cutmesh`]: classification and conforming subdivision of cut background
//!   elements, interface/boundary segments, connected components and ghost facets.
//! * [`enrichment`]: generalized Heaviside enrichment and the enriched DOF map.
//! * [`weakform`]: bulk, Nitsche boundary/interface and ghost-penalty forms.
//! * [`system`]: sparse assembly, direct solve and the Frobenius condition number.
//! * [`analysis`]: problem definition and the solve driver.
//! * [`verification`]: analytical references, error norms and benchmark studies.
//!
//! The crate is `no_std` and only needs an allocator.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod cutmesh;
pub mod enrichment;
pub mod error;
pub mod geometry;
pub mod math;
pub mod splines;
pub mod system;
pub mod verification;
pub mod weakform;

pub use error::{Error, Result};
pub use math::Vec2;
