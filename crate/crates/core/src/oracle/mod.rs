//! Independent ground truth for tests and acceptance runs: closed-form signed distances of
//! simple shapes and an exact discrete distance transform.

mod analytic;
mod edt;

pub use analytic::{analytic_sdf, sample_sphere_surface, AnalyticShape};
pub use edt::{brute_force_distance_transform, exact_distance_transform, DistanceTransform};
