//! Pinhole cameras and camera files.
//!
//! Cameras look down their local −z axis with +x to the right and +y up. The pose maps camera
//! coordinates to world coordinates: `world = R · cam + t`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WorldPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
    /// Camera-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Camera center in world coordinates.
    pub translation: Vector3<f64>,
    pub t_near: f64,
    pub t_far: f64,
}

/// A parametric ray `origin + t · direction` for `t` in `[t_near, t_far]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: WorldPoint,
    /// Unit length.
    pub direction: Vector3<f64>,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> WorldPoint {
        self.origin + self.direction * t
    }
}

impl Camera {
    pub fn new(
        width: usize,
        height: usize,
        focal: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        let cam = Camera {
            width,
            height,
            focal,
            rotation,
            translation,
            t_near,
            t_far,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` resolving the roll.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: WorldPoint,
        target: WorldPoint,
        up: Vector3<f64>,
        width: usize,
        height: usize,
        focal: f64,
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        let back = (eye - target).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidConfig("camera eye and target coincide".into())
        })?;
        let right = up.cross(&back).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidConfig("camera up vector is parallel to the view direction".into())
        })?;
        let true_up = back.cross(&right);
        let rotation = Matrix3::from_columns(&[right, true_up, back]);
        Self::new(width, height, focal, rotation, eye.coords, t_near, t_far)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("camera needs at least one pixel".into()));
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "focal length must be positive, got {}",
                self.focal
            )));
        }
        if !(self.t_near >= 0.0 && self.t_near < self.t_far && self.t_far.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_near < t_far, got [{}, {}]",
                self.t_near, self.t_far
            )));
        }
        let r = &self.rotation;
        let ortho = (r * r.transpose() - Matrix3::identity()).abs().max();
        if !(ortho <= 1e-9 && (r.determinant() - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidConfig(
                "camera rotation must be orthonormal with determinant +1".into(),
            ));
        }
        if !self.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig("camera translation must be finite".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> WorldPoint {
        Point3::from(self.translation)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Ray through the center of pixel `(x, y)`, row `y = 0` at the top.
    #[inline]
    pub fn ray(&self, x: usize, y: usize) -> Ray {
        let u = (x as f64 + 0.5 - 0.5 * self.width as f64) / self.focal;
        let v = -(y as f64 + 0.5 - 0.5 * self.height as f64) / self.focal;
        let dir = (self.rotation * Vector3::new(u, v, -1.0)).normalize();
        Ray {
            origin: self.center(),
            direction: dir,
            t_near: self.t_near,
            t_far: self.t_far,
        }
    }

    /// Ray for linear pixel index `y * width + x`.
    #[inline]
    pub fn ray_at(&self, pixel: usize) -> Ray {
        self.ray(pixel % self.width, pixel / self.width)
    }

    /// Pose as 12 numbers, row-major `[R | t]`.
    pub fn pose_row_major(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                out[4 * r + c] = self.rotation[(r, c)];
            }
            out[4 * r + 3] = self.translation[r];
        }
        out
    }

    pub fn from_pose_row_major(
        width: usize,
        height: usize,
        focal: f64,
        pose: &[f64; 12],
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        let rotation = Matrix3::from_fn(|r, c| pose[4 * r + c]);
        let translation = Vector3::new(pose[3], pose[7], pose[11]);
        Self::new(width, height, focal, rotation, translation, t_near, t_far)
    }
}

/// One ray per pixel, row-major from the top-left pixel.
pub fn generate_rays(camera: &Camera) -> Vec<Ray> {
    (0..camera.pixel_count()).map(|i| camera.ray_at(i)).collect()
}

/// Serializes a camera as `key = value` lines.
pub fn encode_camera(camera: &Camera) -> String {
    let pose = camera
        .pose_row_major()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "width = {}\nheight = {}\nfocal = {}\npose = {}\nt_near = {}\nt_far = {}\n",
        camera.width, camera.height, camera.focal, pose, camera.t_near, camera.t_far
    )
}

/// Parses `key = value` (or `key: value`) lines; `#` starts a comment.
pub fn decode_camera(text: &str, path: &Path) -> Result<Camera> {
    let bad = |m: String| Error::format(path, m);
    let mut width = None;
    let mut height = None;
    let mut focal = None;
    let mut pose: Option<[f64; 12]> = None;
    let mut t_near = None;
    let mut t_far = None;
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let nums: Vec<f64> = value
            .split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}` for {key}"))))
            .collect::<Result<_>>()?;
        let one = || -> Result<f64> {
            match nums.as_slice() {
                [v] => Ok(*v),
                _ => Err(bad(format!("{key} takes one number"))),
            }
        };
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(bad(format!("{key} must be a positive integer")))
            }
        };
        match key {
            "width" => width = Some(count(one()?)?),
            "height" => height = Some(count(one()?)?),
            "focal" => focal = Some(one()?),
            "t_near" => t_near = Some(one()?),
            "t_far" => t_far = Some(one()?),
            "pose" => {
                pose = Some(
                    nums.as_slice()
                        .try_into()
                        .map_err(|_| bad(format!("pose takes 12 numbers, got {}", nums.len())))?,
                )
            }
            other => return Err(bad(format!("unknown camera key `{other}`"))),
        }
    }
    let missing = |k: &str| bad(format!("missing `{k}`"));
    Camera::from_pose_row_major(
        width.ok_or_else(|| missing("width"))?,
        height.ok_or_else(|| missing("height"))?,
        focal.ok_or_else(|| missing("focal"))?,
        &pose.ok_or_else(|| missing("pose"))?,
        t_near.ok_or_else(|| missing("t_near"))?,
        t_far.ok_or_else(|| missing("t_far"))?,
    )
    .map_err(|e| bad(e.to_string()))
}

pub fn read_camera(path: impl AsRef<Path>) -> Result<Camera> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_camera(&text, path)
}

pub fn write_camera(camera: &Camera, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_camera(camera)).map_err(|e| Error::io(path, e))
}

/// `transforms.json`-style camera set: a horizontal field of view and 4×4 camera-to-world
/// matrices, one per frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformsFile {
    pub camera_angle_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far: Option<f64>,
    pub frames: Vec<TransformsFrame>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformsFrame {
    pub file_path: String,
    pub transform_matrix: [[f64; 4]; 4],
}

/// A camera plus the image path named by its frame, relative to the file's directory.
#[derive(Debug, Clone)]
pub struct PosedFrame {
    pub camera: Camera,
    pub image: PathBuf,
}

/// Loads a transforms file for images of `width × height` pixels.
///
/// `default_range` supplies `(t_near, t_far)` when the file carries no `near`/`far` keys.
pub fn load_transforms(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    default_range: (f64, f64),
) -> Result<Vec<PosedFrame>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TransformsFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let fov = file.camera_angle_x;
    if !(fov > 0.0 && fov < std::f64::consts::PI) {
        return Err(Error::format(path, format!("bad camera_angle_x {fov}")));
    }
    let focal = 0.5 * width as f64 / (0.5 * fov).tan();
    let t_near = file.near.unwrap_or(default_range.0);
    let t_far = file.far.unwrap_or(default_range.1);
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    file.frames
        .iter()
        .map(|frame| {
            let m = &frame.transform_matrix;
            let rotation = Matrix3::from_fn(|r, c| m[r][c]);
            let translation = Vector3::new(m[0][3], m[1][3], m[2][3]);
            let camera = Camera::new(width, height, focal, rotation, translation, t_near, t_far)
                .map_err(|e| Error::format(path, format!("{}: {e}", frame.file_path)))?;
            Ok(PosedFrame {
                camera,
                image: dir.join(&frame.file_path),
            })
        })
        .collect()
}

/// Builds a transforms file for cameras that share intrinsics.
pub fn transforms_for(cameras: &[(Camera, String)]) -> Result<TransformsFile> {
    let first = &cameras
        .first()
        .ok_or(Error::EmptyInput("no cameras to describe"))?
        .0;
    let fov = 2.0 * (0.5 * first.width as f64 / first.focal).atan();
    let frames = cameras
        .iter()
        .map(|(c, name)| {
            let mut m = [[0.0; 4]; 4];
            for r in 0..3 {
                for k in 0..3 {
                    m[r][k] = c.rotation[(r, k)];
                }
                m[r][3] = c.translation[r];
            }
            m[3][3] = 1.0;
            TransformsFrame {
                file_path: name.clone(),
                transform_matrix: m,
            }
        })
        .collect();
    Ok(TransformsFile {
        camera_angle_x: fov,
        near: Some(first.t_near),
        far: Some(first.t_far),
        frames,
    })
}
