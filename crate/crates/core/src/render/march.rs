use crate::grid::WorldPoint;
use crate::smoothing::SmoothedGrid;
use crate::transfer::{density, TransferConfig};

use super::camera::Ray;

/// Opacity weights below this leave the depth undefined.
pub const MIN_DEPTH_OPACITY: f64 = 0.5;

/// A nonnegative density queried at world points.
pub trait DensityField: Sync {
    fn density(&self, p: &WorldPoint) -> f64;
}

impl<F> DensityField for F
where
    F: Fn(&WorldPoint) -> f64 + Sync,
{
    fn density(&self, p: &WorldPoint) -> f64 {
        self(p)
    }
}

/// Density derived from a smoothed occupancy grid through the transfer functions.
#[derive(Debug, Clone, Copy)]
pub struct GridDensity<'a> {
    pub smoothed: &'a SmoothedGrid,
    pub transfer: TransferConfig,
}

impl DensityField for GridDensity<'_> {
    fn density(&self, p: &WorldPoint) -> f64 {
        density(self.smoothed.sample(p), &self.transfer)
    }
}

/// Midpoint sample positions `(t_i, δ_i)` covering `[t_near, t_far]`.
///
/// Samples sit at `t_near + (i + 1/2)·step`; a trailing partial interval gets its own midpoint
/// and a shortened `δ`.
pub fn sample_positions(t_near: f64, t_far: f64, step: f64) -> impl Iterator<Item = (f64, f64)> {
    let len = (t_far - t_near).max(0.0);
    let full = if step > 0.0 { (len / step).floor() as usize } else { 0 };
    let rest = len - full as f64 * step;
    // ignore slivers produced by rounding in len / step
    let tail = (rest > 1e-9 * step).then_some((t_near + full as f64 * step + 0.5 * rest, rest));
    (0..full)
        .map(move |i| (t_near + (i as f64 + 0.5) * step, step))
        .chain(tail)
}

/// Result of marching one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMarch {
    pub opacity: f64,
    /// `None` when the opacity is below [`MIN_DEPTH_OPACITY`].
    pub depth: Option<f64>,
    /// Transmittance before each sample, followed by the transmittance after the last one.
    pub transmittance: Vec<f64>,
}

impl RayMarch {
    pub fn final_transmittance(&self) -> f64 {
        *self.transmittance.last().unwrap_or(&1.0)
    }
}

/// Alpha-compositing quadrature of the volume rendering integral along `ray`.
pub fn march_ray(ray: &Ray, field: &dyn DensityField, step: f64) -> RayMarch {
    let mut trace = Vec::new();
    let (opacity, depth) = march(ray, field, step, Some(&mut trace));
    RayMarch {
        opacity,
        depth,
        transmittance: trace,
    }
}

pub(crate) fn march(
    ray: &Ray,
    field: &dyn DensityField,
    step: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> (f64, Option<f64>) {
    let mut transmittance = 1.0;
    let mut opacity = 0.0;
    let mut weighted_t = 0.0;
    for (t, delta) in sample_positions(ray.t_near, ray.t_far, step) {
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(transmittance);
        }
        let sigma = field.density(&ray.at(t)).max(0.0);
        let alpha = -(-sigma * delta).exp_m1();
        let w = transmittance * alpha;
        opacity += w;
        weighted_t += w * t;
        transmittance *= 1.0 - alpha;
    }
    if let Some(tr) = trace {
        tr.push(transmittance);
    }
    let opacity = opacity.clamp(0.0, 1.0);
    let depth = (opacity >= MIN_DEPTH_OPACITY).then(|| weighted_t / opacity.max(1e-8));
    (opacity, depth)
}
