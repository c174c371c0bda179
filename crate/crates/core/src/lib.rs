//! Criticality-weighted evaluation of 3D object detectors.
//!
//! Objects are weighted by how dangerous they are to the ego vehicle, and
//! precision/recall are replaced by criticality-weighted counterparts
//! (`P_R`, `R_S`) whose area gives `AP_crit`.

pub mod birdview;
pub mod criticality;
mod error;
pub mod geometry;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod sweep;
pub mod synthgen;

pub use error::{Error, Result};
