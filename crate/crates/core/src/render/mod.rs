//! Ray-marched volume rendering of density fields with a flat albedo on a white background.

mod camera;
mod image;
mod march;

pub use camera::{
    decode_camera, encode_camera, generate_rays, load_transforms, read_camera, transforms_for,
    write_camera, Camera, PosedFrame, Ray, TransformsFile, TransformsFrame,
};
pub use image::{ColorImage, RenderedImage, RAW_DEPTH_BACKGROUND};
pub use march::{
    march_ray, sample_positions, DensityField, GridDensity, RayMarch, MIN_DEPTH_OPACITY,
};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Background color behind every ray.
pub const BACKGROUND: [f64; 3] = [1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    /// Ray-marching step in world units.
    pub step: f64,
    /// Flat surface color in `[0, 1]`.
    pub albedo: [f64; 3],
}

impl RenderSettings {
    /// Two samples per voxel and a black albedo, so the color image is `1 − opacity`.
    pub fn for_spacing(spacing: f64) -> Self {
        RenderSettings {
            step: 0.5 * spacing,
            albedo: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "render step must be positive, got {}",
                self.step
            )));
        }
        if self.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidConfig(format!(
                "albedo must lie in [0, 1], got {:?}",
                self.albedo
            )));
        }
        Ok(())
    }
}

/// Pixel color for a given opacity: albedo composited over [`BACKGROUND`].
#[inline]
pub fn composite(opacity: f64, albedo: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|c| albedo[c] * opacity + BACKGROUND[c] * (1.0 - opacity))
}

pub fn render(
    camera: &Camera,
    field: &dyn DensityField,
    settings: &RenderSettings,
) -> Result<RenderedImage> {
    camera.validate()?;
    settings.validate()?;
    let per_pixel: Vec<(f64, Option<f64>)> = (0..camera.pixel_count())
        .into_par_iter()
        .map(|i| march::march(&camera.ray_at(i), field, settings.step, None))
        .collect();
    let opacity: Vec<f64> = per_pixel.iter().map(|p| p.0).collect();
    let depth = per_pixel.iter().map(|p| p.1).collect();
    let data = opacity
        .iter()
        .flat_map(|&o| composite(o, settings.albedo))
        .collect();
    Ok(RenderedImage {
        width: camera.width,
        height: camera.height,
        opacity,
        depth,
        color: ColorImage::from_data(camera.width, camera.height, data)?,
        t_near: camera.t_near,
        t_far: camera.t_far,
    })
}
