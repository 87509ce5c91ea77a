//! Spectral fields on the unit 3-torus.

pub mod grid;
pub mod mollifier;
pub mod norms;
pub mod ops;
pub mod product;
pub mod snapshot;
pub mod spectral;
pub mod studies;
pub mod transform;

pub use grid::Grid3;
pub use mollifier::mollify;
pub use norms::{cn_norm, lp_norm, sobolev_norm};
pub use ops::{curl, div, grad, inv_laplacian, laplacian};
pub use product::{dot, mul, outer, product, traceless_tensor_product};
pub use spectral::{FieldFlags, Rank, SpectralField};
