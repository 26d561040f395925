//! Certified weak signed distance fields from voxel occupancy grids.
//!
//! The occupancy grid is smoothed with a Gaussian, which equals the randomized-smoothing
//! expectation of the thresholded classifier, and the smoothed probability is mapped to a
//! certified radius `σ·Φ⁻¹(f̂)`. The same smoothed field drives a differentiable volume
//! renderer, a marching-cubes extractor and a small gradient-descent fitter.

pub mod certify;
pub mod error;
pub mod fit;
pub mod grid;
pub mod mesh;
pub mod metrics;
pub mod oracle;
pub mod render;
pub mod smoothing;
pub mod transfer;

pub use error::{Error, Result};
