use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::WorldPoint;

/// Closed-form shapes used as fixtures and ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticShape {
    Sphere { center: WorldPoint, radius: f64 },
    Aabb { min: WorldPoint, max: WorldPoint },
    /// `{ p : normal · p >= offset }` with a unit `normal`.
    Halfspace { normal: Vector3<f64>, offset: f64 },
}

impl AnalyticShape {
    pub fn sphere(center: WorldPoint, radius: f64) -> Result<Self> {
        let s = AnalyticShape::Sphere { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn aabb(min: WorldPoint, max: WorldPoint) -> Result<Self> {
        let s = AnalyticShape::Aabb { min, max };
        s.validate()?;
        Ok(s)
    }

    /// The normal is normalized; `offset` is then measured along the unit normal.
    pub fn halfspace(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::InvalidShape("halfspace normal must be nonzero".into()));
        }
        let s = AnalyticShape::Halfspace {
            normal: normal / len,
            offset,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |p: &Point3<f64>| p.coords.iter().all(|c| c.is_finite());
        match *self {
            AnalyticShape::Sphere { center, radius } => {
                if !finite(&center) || !radius.is_finite() {
                    return Err(Error::InvalidShape("sphere parameters must be finite".into()));
                }
                if radius <= 0.0 {
                    return Err(Error::InvalidShape(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
            AnalyticShape::Aabb { min, max } => {
                if !finite(&min) || !finite(&max) {
                    return Err(Error::InvalidShape("box corners must be finite".into()));
                }
                if (0..3).any(|a| min[a] >= max[a]) {
                    return Err(Error::InvalidShape(format!(
                        "box min {min:?} must be below max {max:?} on every axis"
                    )));
                }
            }
            AnalyticShape::Halfspace { normal, offset } => {
                if !normal.iter().all(|c| c.is_finite()) || !offset.is_finite() {
                    return Err(Error::InvalidShape("halfspace parameters must be finite".into()));
                }
                if (normal.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidShape("halfspace normal must be unit length".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &WorldPoint) -> bool {
        analytic_sdf(self, p) >= 0.0
    }
}

/// Exact signed distance to the shape's surface, positive inside.
pub fn analytic_sdf(shape: &AnalyticShape, p: &WorldPoint) -> f64 {
    match *shape {
        AnalyticShape::Sphere { center, radius } => radius - (p - center).norm(),
        AnalyticShape::Aabb { min, max } => {
            let center = nalgebra::center(&min, &max);
            let half = (max - min) * 0.5;
            let q = (p - center).abs() - half;
            let outside = q.map(|c| c.max(0.0)).norm();
            let inside = q.max().min(0.0);
            -(outside + inside)
        }
        AnalyticShape::Halfspace { normal, offset } => normal.dot(&p.coords) - offset,
    }
}

/// `n` points uniform on a sphere surface (normalized Gaussian directions), reproducible by seed.
pub fn sample_sphere_surface(center: WorldPoint, radius: f64, n: usize, seed: u64) -> Vec<WorldPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if let Some(u) = d.try_normalize(1e-12) {
            out.push(center + u * radius);
        }
    }
    out
}
