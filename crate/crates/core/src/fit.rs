//! Gradient-based fitting of an occupancy grid to posed silhouette images.
//!
//! The forward model is the same chain used for rendering: smoothing, sigmoid, density and
//! alpha-compositing quadrature. Gradients flow back through each stage analytically; the
//! smoothing adjoint is convolution with the same symmetric kernel.
//!
//! Supervision is geometry only. Targets are flat-albedo renders, so the fitted grid explains
//! silhouettes and nothing about appearance.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridLayout, VoxelGrid};
use crate::metrics::psnr;
use crate::render::{
    composite, render, sample_positions, Camera, ColorImage, GridDensity, Ray, RenderSettings,
    RenderedImage,
};
use crate::smoothing::{convolve_separable, smooth, SmoothingConfig};
use crate::transfer::{density_and_grad, TransferConfig};

/// Rays per gradient partial; fixed so accumulation order never depends on the thread count.
const CHUNK_RAYS: usize = 256;

/// Line search: growth after an accepted step, shrink after a rejected one.
const STEP_GROWTH: f64 = 1.25;
const STEP_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 12;
const MIN_STEP: f64 = 1e-6;
const MAX_STEP: f64 = 1.0;

/// One posed camera and the image it should see.
#[derive(Debug, Clone)]
pub struct View {
    pub camera: Camera,
    pub target: ColorImage,
}

/// Everything that maps a voxel grid to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderModel {
    pub smoothing: SmoothingConfig,
    pub transfer: TransferConfig,
    pub settings: RenderSettings,
}

impl RenderModel {
    /// Default transfer functions, a black albedo and two samples per voxel.
    pub fn for_layout(layout: &GridLayout, smoothing: SmoothingConfig) -> Self {
        RenderModel {
            smoothing,
            transfer: TransferConfig::default(),
            settings: RenderSettings::for_spacing(layout.spacing),
        }
    }

    pub fn render(&self, grid: &VoxelGrid, camera: &Camera) -> Result<RenderedImage> {
        let smoothed = smooth(grid, &self.smoothing)?;
        let field = GridDensity {
            smoothed: &smoothed,
            transfer: self.transfer,
        };
        render(camera, &field, &self.settings)
    }

    /// Views whose targets are this model's renders of `grid`.
    pub fn make_views(&self, grid: &VoxelGrid, cameras: &[Camera]) -> Result<Vec<View>> {
        cameras
            .iter()
            .map(|c| {
                Ok(View {
                    camera: c.clone(),
                    target: self.render(grid, c)?.color,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    /// Initial largest per-voxel change of a step; adapted by the line search.
    pub learning_rate: f64,
    /// Rays per step; at or above the total ray count every step uses all rays.
    pub batch_rays: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 500,
            learning_rate: 0.1,
            batch_rays: 4096,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_rays == 0 {
            return Err(Error::InvalidConfig("batch must hold at least one ray".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Batch loss after each iteration's step.
    pub loss_trace: Vec<f64>,
    /// Mean PSNR over held-out views, if any were given.
    pub heldout_psnr: Option<f64>,
    pub seconds: f64,
    /// Iteration whose grid was returned.
    pub best_iteration: usize,
    pub final_step: f64,
}

/// `(view index, pixel index)`.
pub type RayId = (usize, usize);

pub fn all_rays(views: &[View]) -> Vec<RayId> {
    views
        .iter()
        .enumerate()
        .flat_map(|(v, view)| (0..view.camera.pixel_count()).map(move |p| (v, p)))
        .collect()
}

fn check_views(views: &[View]) -> Result<()> {
    if views.is_empty() {
        return Err(Error::EmptyInput("fitting needs at least one view"));
    }
    for (i, v) in views.iter().enumerate() {
        v.camera.validate()?;
        if (v.camera.width, v.camera.height) != (v.target.width, v.target.height) {
            return Err(Error::DimensionMismatch(format!(
                "view {i}: camera is {}x{} but target is {}x{}",
                v.camera.width, v.camera.height, v.target.width, v.target.height
            )));
        }
    }
    Ok(())
}

/// Sample along one ray that carries gradient: its trilinear stencil and `δ·dσ/df̂`.
struct Sample {
    stencil: [(Option<usize>, f64); 8],
    scale: f64,
}

/// Opacity of one ray through the smoothed field, matching [`render`] bit for bit.
fn trace(
    fhat: &VoxelGrid,
    ray: &Ray,
    transfer: &TransferConfig,
    step: f64,
    mut samples: Option<&mut Vec<Sample>>,
) -> (f64, f64) {
    let layout = fhat.layout();
    let values = fhat.values();
    let mut transmittance = 1.0;
    let mut opacity = 0.0;
    for (t, delta) in sample_positions(ray.t_near, ray.t_far, step) {
        let Some(stencil) = layout.trilinear_stencil(&ray.at(t)) else {
            continue;
        };
        let f: f64 = stencil
            .iter()
            .map(|&(idx, w)| idx.map_or(0.0, |i| w * values[i]))
            .sum();
        let (sigma, dsigma) = density_and_grad(f, transfer);
        if sigma == 0.0 && dsigma == 0.0 {
            continue;
        }
        let alpha = -(-sigma * delta).exp_m1();
        opacity += transmittance * alpha;
        transmittance *= 1.0 - alpha;
        if let Some(s) = samples.as_deref_mut() {
            if dsigma != 0.0 {
                s.push(Sample {
                    stencil,
                    scale: delta * dsigma,
                });
            }
        }
    }
    (opacity.clamp(0.0, 1.0), transmittance)
}

struct Prepared {
    fhat: VoxelGrid,
    kernel: Vec<f64>,
}

fn prepare(grid: &VoxelGrid, model: &RenderModel) -> Result<Prepared> {
    model.settings.validate()?;
    model.transfer.validate()?;
    let kernel = model.smoothing.kernel_for(grid.layout())?;
    let fhat = smooth(grid, &model.smoothing)?.grid;
    Ok(Prepared { fhat, kernel })
}

/// Squared color error of one ray and its derivative with respect to the ray's opacity.
fn pixel_error(opacity: f64, albedo: [f64; 3], target: [f64; 3]) -> (f64, f64) {
    let color = composite(opacity, albedo);
    let mut loss = 0.0;
    let mut d_opacity = 0.0;
    for c in 0..3 {
        let e = color[c] - target[c];
        loss += e * e;
        // d color / d opacity = albedo − background
        d_opacity += 2.0 * e * (albedo[c] - 1.0);
    }
    (loss, d_opacity)
}

/// Mean squared color error over `rays` (all three channels).
pub fn loss(grid: &VoxelGrid, views: &[View], model: &RenderModel, rays: &[RayId]) -> Result<f64> {
    check_views(views)?;
    if rays.is_empty() {
        return Err(Error::EmptyInput("loss over an empty ray batch"));
    }
    let prep = prepare(grid, model)?;
    let partials: Vec<f64> = rays
        .par_chunks(CHUNK_RAYS)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(v, p)| {
                    let view = &views[v];
                    let (o, _) = trace(
                        &prep.fhat,
                        &view.camera.ray_at(p),
                        &model.transfer,
                        model.settings.step,
                        None,
                    );
                    pixel_error(o, model.settings.albedo, pixel_of(&view.target, p)).0
                })
                .sum()
        })
        .collect();
    Ok(partials.iter().sum::<f64>() / (3 * rays.len()) as f64)
}

#[inline]
fn pixel_of(img: &ColorImage, p: usize) -> [f64; 3] {
    [img.data[3 * p], img.data[3 * p + 1], img.data[3 * p + 2]]
}

/// Loss and its gradient with respect to every voxel value of `grid`.
pub fn loss_and_grad(
    grid: &VoxelGrid,
    views: &[View],
    model: &RenderModel,
    rays: &[RayId],
) -> Result<(f64, VoxelGrid)> {
    check_views(views)?;
    if rays.is_empty() {
        return Err(Error::EmptyInput("loss over an empty ray batch"));
    }
    let prep = prepare(grid, model)?;
    let n = grid.len();
    let norm = 1.0 / (3 * rays.len()) as f64;

    let partials: Vec<(f64, Vec<f64>)> = rays
        .par_chunks(CHUNK_RAYS)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let mut loss = 0.0;
            let mut samples = Vec::new();
            for &(v, p) in chunk {
                let view = &views[v];
                samples.clear();
                let (o, t_final) = trace(
                    &prep.fhat,
                    &view.camera.ray_at(p),
                    &model.transfer,
                    model.settings.step,
                    Some(&mut samples),
                );
                let (l, d_opacity) = pixel_error(o, model.settings.albedo, pixel_of(&view.target, p));
                loss += l;
                // opacity = 1 − Π exp(−σ_i δ_i), so d opacity / d σ_i = δ_i · T_final
                let upstream = norm * d_opacity * t_final;
                if upstream == 0.0 {
                    continue;
                }
                for s in &samples {
                    let gf = upstream * s.scale;
                    for &(idx, w) in &s.stencil {
                        if let Some(i) = idx {
                            g[i] += gf * w;
                        }
                    }
                }
            }
            (loss, g)
        })
        .collect();

    let mut loss = 0.0;
    let mut g_fhat = vec![0.0; n];
    for (l, g) in partials {
        loss += l;
        for (acc, x) in g_fhat.iter_mut().zip(g) {
            *acc += x;
        }
    }
    let grad = convolve_separable(&g_fhat, grid.dims(), &prep.kernel);
    Ok((
        loss * norm,
        VoxelGrid::new(*grid.layout(), FieldKind::Scalar, grad)?,
    ))
}

/// Adjoint of smoothing: maps a gradient on `f̂` to a gradient on the voxel values.
pub fn smoothing_adjoint(
    upstream: &[f64],
    layout: &GridLayout,
    cfg: &SmoothingConfig,
) -> Result<Vec<f64>> {
    if upstream.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient has {} values for a grid of {}",
            upstream.len(),
            layout.len()
        )));
    }
    let kernel = cfg.kernel_for(layout)?;
    Ok(convolve_separable(upstream, layout.dims, &kernel))
}

fn pick_batch(total: &[RayId], size: usize, rng: &mut ChaCha8Rng) -> Vec<RayId> {
    if size >= total.len() {
        return total.to_vec();
    }
    let mut idx = rand::seq::index::sample(rng, total.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| total[i]).collect()
}

/// Mean PSNR of `grid`'s renders against the views' targets.
pub fn mean_psnr(grid: &VoxelGrid, views: &[View], model: &RenderModel) -> Result<f64> {
    check_views(views)?;
    let mut total = 0.0;
    for v in views {
        total += psnr(&model.render(grid, &v.camera)?.color, &v.target)?.db;
    }
    Ok(total / views.len() as f64)
}

/// Projected gradient descent with a backtracking step size.
///
/// Each step moves voxel values by `step · g / max|g|` and clamps them to `[0, 1]`. A step is
/// accepted only if the batch loss does not increase; otherwise the step shrinks and is retried.
/// Returns the grid with the lowest recorded loss.
pub fn fit(
    initial: &VoxelGrid,
    views: &[View],
    heldout: &[View],
    model: &RenderModel,
    cfg: &FitConfig,
) -> Result<(VoxelGrid, FitReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check_views(views)?;
    if !heldout.is_empty() {
        check_views(heldout)?;
    }
    let mut grid = initial.clone().with_kind(FieldKind::Occupancy)?;
    let rays = all_rays(views);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut step = cfg.learning_rate.min(MAX_STEP);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut best = (f64::INFINITY, 0, grid.clone());

    for it in 0..cfg.iterations {
        let batch = pick_batch(&rays, cfg.batch_rays, &mut rng);
        let (current, grad) = loss_and_grad(&grid, views, model, &batch)?;
        if !current.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                loss: current,
            });
        }
        let gmax = grad.values().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut accepted = current;
        if gmax > 0.0 {
            for _ in 0..MAX_BACKTRACKS {
                let scale = step / gmax;
                let values: Vec<f64> = grid
                    .values()
                    .iter()
                    .zip(grad.values())
                    .map(|(v, g)| (v - scale * g).clamp(0.0, 1.0))
                    .collect();
                let candidate = grid.with_values(FieldKind::Occupancy, values)?;
                let l = loss(&candidate, views, model, &batch)?;
                if !l.is_finite() {
                    return Err(Error::Diverged {
                        iteration: it,
                        loss: l,
                    });
                }
                if l <= current {
                    grid = candidate;
                    accepted = l;
                    step = (step * STEP_GROWTH).min(MAX_STEP);
                    break;
                }
                step = (step * STEP_SHRINK).max(MIN_STEP);
            }
        }
        trace.push(accepted);
        if accepted < best.0 {
            best = (accepted, it, grid.clone());
        }
    }

    let (_, best_iteration, best_grid) = best;
    let heldout_psnr = if heldout.is_empty() {
        None
    } else {
        Some(mean_psnr(&best_grid, heldout, model)?)
    };
    Ok((
        best_grid,
        FitReport {
            loss_trace: trace,
            heldout_psnr,
            seconds: start.elapsed().as_secs_f64(),
            best_iteration,
            final_step: step,
        },
    ))
}
