//! Spectral convex-integration engine for the stationary EMHD-Reynolds system
//! on the unit 3-torus.

pub mod antidiv;
pub mod error;
pub mod field;
pub mod geom;
pub mod harness;
pub mod mikado;
pub mod params;
pub mod scheme;

pub use error::{Error, Result};
