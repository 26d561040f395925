//! One function per subcommand. Each resolves its settings, does the work, writes its outputs
//! and then a manifest describing them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use csdf_core::certify::{certify_monte_carlo, weak_sdf, McConfig, DEFAULT_EPS_P};
use csdf_core::fit::{fit, FitConfig, RenderModel, View};
use csdf_core::grid::{
    make_analytic_grid, read_grid, write_grid, write_grid_text, FieldKind, GridLayout, VoxelGrid,
};
use csdf_core::mesh::{marching_cubes, read_mesh, write_mesh, MeshFormat, DEFAULT_ISOVALUE};
use csdf_core::metrics::{chamfer, psnr, sample_mesh, ChamferMode, DEFAULT_SAMPLES};
use csdf_core::oracle::{analytic_sdf, exact_distance_transform, AnalyticShape};
use csdf_core::render::{
    load_transforms, read_camera, transforms_for, write_camera, Camera, ColorImage,
    RenderSettings,
};
use csdf_core::smoothing::{smooth, SmoothingConfig, DEFAULT_SIGMA_VOXELS, DEFAULT_TRUNCATION};
use csdf_core::transfer::{TransferConfig, DEFAULT_ALPHA, DEFAULT_DENSITY_SCALE, DEFAULT_EPS_D};
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::args::*;
use crate::config::{Resolver, Units};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_MC_ALPHA: f64 = 1e-3;
pub const DEFAULT_FIT_ITERS: usize = 500;
pub const DEFAULT_FIT_LR: f64 = 0.1;
pub const DEFAULT_FIT_INIT: f64 = 0.5;
/// Ray range for transforms files that carry no near/far keys.
const TRANSFORMS_RANGE: (f64, f64) = (2.0, 6.0);

pub fn run(command: Command, r: &mut Resolver) -> CliResult<()> {
    match command {
        Command::Smooth(a) => smooth_cmd(a, r),
        Command::Sdf(a) => sdf_cmd(a, r),
        Command::CertifyMc(a) => certify_cmd(a, r),
        Command::Render(a) => render_cmd(a, r),
        Command::Mesh(a) => mesh_cmd(a, r),
        Command::Eval(e) => eval_cmd(e, r),
        Command::Fit(a) => fit_cmd(a, r),
        Command::MakeFixture(f) => fixture_cmd(f, r),
        Command::Oracle(o) => oracle_cmd(o, r),
    }
}

fn smoothing_config(
    r: &mut Resolver,
    f: &SmoothingFlags,
    spacing: f64,
) -> CliResult<SmoothingConfig> {
    let units = r.pick("sigma_units", f.sigma_units, |c| c.sigma_units, Units::Voxel);
    let default = match units {
        Units::Voxel => DEFAULT_SIGMA_VOXELS,
        Units::World => DEFAULT_SIGMA_VOXELS * spacing,
    };
    let sigma = r.pick("sigma", f.sigma, |c| c.sigma, default);
    let truncation = r.pick("truncation", f.truncation, |c| c.truncation, DEFAULT_TRUNCATION);
    let world = match units {
        Units::Voxel => sigma * spacing,
        Units::World => sigma,
    };
    r.record("sigma_world", world);
    Ok(SmoothingConfig::new(world, truncation)?)
}

fn transfer_config(r: &mut Resolver, f: &TransferFlags) -> CliResult<TransferConfig> {
    let alpha = r.pick("alpha", f.alpha, |c| c.alpha, DEFAULT_ALPHA);
    let scale = r.pick("density_scale", f.density_scale, |c| c.density_scale, DEFAULT_DENSITY_SCALE);
    let eps_d = r.pick("eps_d", f.eps_d, |c| c.eps_d, DEFAULT_EPS_D);
    Ok(TransferConfig::new(alpha, scale, eps_d)?)
}

fn render_settings(r: &mut Resolver, f: &RenderFlags, spacing: f64) -> CliResult<RenderSettings> {
    let defaults = RenderSettings::for_spacing(spacing);
    let step = r.pick("step", f.step, |c| c.step, defaults.step);
    let albedo = f.albedo.or(r.file.albedo).unwrap_or(defaults.albedo);
    r.record("albedo", format!("{},{},{}", albedo[0], albedo[1], albedo[2]));
    let settings = RenderSettings { step, albedo };
    settings.validate()?;
    Ok(settings)
}

fn render_model(
    r: &mut Resolver,
    layout: &GridLayout,
    smoothing: &SmoothingFlags,
    transfer: &TransferFlags,
    render: &RenderFlags,
) -> CliResult<RenderModel> {
    Ok(RenderModel {
        smoothing: smoothing_config(r, smoothing, layout.spacing)?,
        transfer: transfer_config(r, transfer)?,
        settings: render_settings(r, render, layout.spacing)?,
    })
}

fn require_kind(grid: &VoxelGrid, path: &Path, kinds: &[FieldKind]) -> CliResult<()> {
    if kinds.contains(&grid.kind()) {
        return Ok(());
    }
    let names: Vec<_> = kinds.iter().map(|k| k.name()).collect();
    Err(csdf_core::Error::InvalidGrid(format!(
        "{}: expected a {} grid, found {}",
        path.display(),
        names.join(" or "),
        grid.kind().name()
    ))
    .into())
}

fn save_grid(grid: &VoxelGrid, path: &Path, text: bool) -> CliResult<()> {
    if text {
        write_grid_text(grid, path)?;
    } else {
        write_grid(grid, path)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `out`, or prints it when no path was given.
fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn layout_of(flags: &LayoutFlags) -> CliResult<GridLayout> {
    Ok(GridLayout::cube(flags.dims, flags.bounds[0], flags.bounds[1])?)
}

fn point(v: [f64; 3]) -> Point3<f64> {
    Point3::new(v[0], v[1], v[2])
}

fn smooth_cmd(a: SmoothArgs, r: &mut Resolver) -> CliResult<()> {
    let grid = read_grid(&a.input)?;
    require_kind(&grid, &a.input, &[FieldKind::Occupancy])?;
    let cfg = smoothing_config(r, &a.smoothing, grid.spacing())?;
    let smoothed = smooth(&grid, &cfg)?;
    save_grid(&smoothed.grid, &a.out, a.text)?;
    Manifest::new("smooth")
        .input("grid", &a.input)
        .output("grid", &a.out)
        .write(r, &a.out)?;
    Ok(())
}

fn sdf_cmd(a: SdfArgs, r: &mut Resolver) -> CliResult<()> {
    let mut grid = read_grid(&a.input)?;
    require_kind(&grid, &a.input, &[FieldKind::Occupancy])?;
    r.record("binarize", a.binarize);
    if a.binarize {
        grid = grid.binarize();
    }
    let cfg = smoothing_config(r, &a.smoothing, grid.spacing())?;
    let eps_p = r.pick("eps_p", a.eps_p, |c| c.eps_p, DEFAULT_EPS_P);
    let sdf = weak_sdf(&smooth(&grid, &cfg)?, eps_p)?;
    if !sdf.guaranteed {
        eprintln!("note: input is not binary; the weak SDF is not a guaranteed bound (see --binarize)");
    }
    save_grid(&sdf.grid, &a.out, a.text)?;
    let mut manifest = Manifest::new("sdf");
    manifest.input("grid", &a.input).output("grid", &a.out);
    let mut slice_paths = Vec::new();
    if let Some(dir) = &a.slices {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (axis, name) in ["x", "y", "z"].iter().enumerate() {
            let ext = match a.slice_format {
                ImageFormat::Ppm => "ppm",
                ImageFormat::Png => "png",
            };
            let path = dir.join(format!("sdf_{name}_cut.{ext}"));
            sdf_slice(&sdf.grid, axis, sdf.ceiling()).write(&path)?;
            slice_paths.push((format!("slice_{name}"), path));
        }
    }
    for (role, path) in &slice_paths {
        manifest.output(role, path);
    }
    manifest.write(r, &a.out)?;
    Ok(())
}

/// Color-mapped cut through the grid center perpendicular to `axis`: blue inside, red outside,
/// fading to white at the surface, with the zero crossing drawn black.
pub fn sdf_slice(grid: &VoxelGrid, axis: usize, ceiling: f64) -> ColorImage {
    let dims = grid.dims();
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (w, h) = (dims[u], dims[v]);
    let mid = dims[axis] / 2;
    let half_voxel = 0.5 * grid.spacing();
    let mut img = ColorImage::filled(w, h, [1.0; 3]);
    for y in 0..h {
        for x in 0..w {
            let mut c = [0; 3];
            c[axis] = mid;
            c[u] = x;
            // image rows run downward, grid axes upward
            c[v] = h - 1 - y;
            let d = grid.get(c[0], c[1], c[2]);
            let t = (d / ceiling).clamp(-1.0, 1.0);
            let rgb = if d.abs() < half_voxel {
                [0.0; 3]
            } else if t > 0.0 {
                [1.0 - t, 1.0 - 0.6 * t, 1.0]
            } else {
                [1.0, 1.0 + 0.6 * t, 1.0 + t]
            };
            img.set_pixel(x, y, rgb);
        }
    }
    img
}

/// Whitespace- or comma-separated `x y z` per line; blank lines and `#` comments are skipped.
pub fn read_probes(path: &Path) -> CliResult<Vec<Point3<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut probes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad_line(path, i))?;
        match v.as_slice() {
            [x, y, z] => probes.push(Point3::new(*x, *y, *z)),
            _ => return Err(bad_line(path, i)),
        }
    }
    if probes.is_empty() {
        return Err(csdf_core::Error::EmptyInput("probe file lists no points").into());
    }
    Ok(probes)
}

fn bad_line(path: &Path, i: usize) -> CliError {
    csdf_core::Error::Format {
        path: path.to_path_buf(),
        message: format!("line {}: expected three numbers", i + 1),
    }
    .into()
}

fn certify_cmd(a: CertifyArgs, r: &mut Resolver) -> CliResult<()> {
    let grid = read_grid(&a.input)?;
    require_kind(&grid, &a.input, &[FieldKind::Occupancy])?;
    let probes = read_probes(&a.probes)?;
    let smoothing = smoothing_config(r, &a.smoothing, grid.spacing())?;
    let cfg = McConfig {
        sigma_world: smoothing.sigma_world,
        n_samples: r.pick("mc_samples", a.n, |c| c.mc_samples, DEFAULT_MC_SAMPLES),
        alpha_conf: r.pick("mc_alpha", a.alpha, |c| c.mc_alpha, DEFAULT_MC_ALPHA),
        eps_p: r.pick("eps_p", a.eps_p, |c| c.eps_p, DEFAULT_EPS_P),
        seed: r.pick("seed", a.seed, |c| c.seed, 0),
    };
    cfg.validate()?;
    let smoothed = smooth(&grid, &smoothing)?;
    let sdf = weak_sdf(&smoothed, cfg.eps_p)?;
    let rows = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| certify_monte_carlo(&grid, p, &cfg, i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from(
        "x,y,z,class,p_hat,p_lower,radius_lower,abstained,confidence,fhat,weak_sdf\n",
    );
    for c in &rows {
        let fhat = smoothed.sample(&c.point);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.point.x,
            c.point.y,
            c.point.z,
            c.class,
            c.p_hat,
            c.p_lower,
            c.radius_lower,
            c.abstained,
            c.confidence,
            fhat,
            sdf.grid.sample_trilinear(&c.point),
        );
    }
    emit(&csv, a.out.as_deref())?;
    if let Some(out) = &a.out {
        Manifest::new("certify-mc")
            .input("grid", &a.input)
            .input("probes", &a.probes)
            .output("report", out)
            .write(r, out)?;
    }
    Ok(())
}

fn render_cmd(a: RenderArgs, r: &mut Resolver) -> CliResult<()> {
    let grid = read_grid(&a.input)?;
    require_kind(&grid, &a.input, &[FieldKind::Occupancy])?;
    let camera = read_camera(&a.camera)?;
    let model = render_model(r, grid.layout(), &a.smoothing, &a.transfer, &a.render)?;
    let image = model.render(&grid, &camera)?;
    image.color.write(&a.out)?;
    let mut manifest = Manifest::new("render");
    manifest
        .input("grid", &a.input)
        .input("camera", &a.camera)
        .output("color", &a.out);
    if let Some(p) = &a.depth {
        image.write_depth_png(p)?;
        manifest.output("depth", p);
    }
    if let Some(p) = &a.depth_raw {
        image.write_depth_raw(p)?;
        manifest.output("depth_raw", p);
    }
    manifest.write(r, &a.out)?;
    Ok(())
}

fn mesh_cmd(a: MeshArgs, r: &mut Resolver) -> CliResult<()> {
    let grid = read_grid(&a.input)?;
    require_kind(
        &grid,
        &a.input,
        &[FieldKind::WeakSdf, FieldKind::Distance, FieldKind::Scalar],
    )?;
    let format = match a.format {
        Some(MeshFormatArg::Obj) => MeshFormat::Obj,
        Some(MeshFormatArg::Ply) => MeshFormat::Ply,
        None => MeshFormat::from_path(&a.out).ok_or_else(|| {
            CliError::usage("cannot infer mesh format from --out; pass --format obj|ply")
        })?,
    };
    r.record("format", format.extension());
    let units = r.pick("isovalue_units", a.isovalue_units, |c| c.isovalue_units, Units::Voxel);
    let isovalue = r.pick("isovalue", a.isovalue, |c| c.isovalue, DEFAULT_ISOVALUE);
    let world = match units {
        Units::Voxel => isovalue * grid.spacing(),
        Units::World => isovalue,
    };
    r.record("isovalue_world", world);
    let mesh = marching_cubes(&grid, world)?;
    if mesh.is_empty() {
        let (lo, hi) = grid.min_max();
        eprintln!("note: no surface at level {world} (world units); field spans [{lo}, {hi}]");
    }
    write_mesh(&mesh, format, &a.out)?;
    eprintln!(
        "{} vertices, {} triangles, closed: {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.is_closed()
    );
    Manifest::new("mesh")
        .input("grid", &a.input)
        .output("mesh", &a.out)
        .write(r, &a.out)?;
    Ok(())
}

fn eval_cmd(e: EvalCommand, r: &mut Resolver) -> CliResult<()> {
    match e {
        EvalCommand::Psnr { a, b, out } => {
            let ia = ColorImage::read(&a)?;
            let ib = ColorImage::read(&b)?;
            let p = psnr(&ia, &ib)?;
            let csv = format!(
                "a,b,psnr_db,mse,capped\n{},{},{},{},{}\n",
                a.display(),
                b.display(),
                p.db,
                p.mse,
                p.capped
            );
            emit(&csv, out.as_deref())?;
            if let Some(out) = &out {
                Manifest::new("eval psnr")
                    .input("a", &a)
                    .input("b", &b)
                    .output("report", out)
                    .write(r, out)?;
            }
        }
        EvalCommand::Chamfer {
            a,
            b,
            samples,
            seed,
            root,
            out,
        } => {
            let n = r.pick("samples", samples, |c| c.samples, DEFAULT_SAMPLES);
            let seed = r.pick("seed", seed, |c| c.seed, 0);
            let mode = if root { ChamferMode::Root } else { ChamferMode::Squared };
            r.record("chamfer_mode", if root { "root" } else { "squared" });
            let pa = sample_mesh(&read_mesh(&a)?, n, seed)?;
            let pb = sample_mesh(&read_mesh(&b)?, n, seed.wrapping_add(1))?;
            let d = chamfer(&pa, &pb, mode)?;
            let csv = format!(
                "a,b,samples,seed,mode,chamfer\n{},{},{n},{seed},{},{d}\n",
                a.display(),
                b.display(),
                r.resolved["chamfer_mode"],
            );
            emit(&csv, out.as_deref())?;
            if let Some(out) = &out {
                Manifest::new("eval chamfer")
                    .input("a", &a)
                    .input("b", &b)
                    .output("report", out)
                    .write(r, out)?;
            }
        }
    }
    Ok(())
}

/// Loads a scene directory: `NAME.cam` files with `NAME.ppm` or `NAME.png` targets, or a
/// `transforms.json` when no camera files are present.
pub fn load_scene(dir: &Path) -> CliResult<Vec<View>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut cams: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cam"))
        .collect();
    cams.sort();
    if cams.is_empty() {
        return load_transforms_scene(&dir.join("transforms.json"));
    }
    cams.iter()
        .map(|cam| {
            let camera = read_camera(cam)?;
            let target = ["ppm", "png"]
                .iter()
                .map(|ext| cam.with_extension(ext))
                .find(|p| p.is_file())
                .ok_or_else(|| csdf_core::Error::Io {
                    path: cam.with_extension("ppm"),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "no target image (.ppm or .png) for this camera",
                    ),
                })?;
            Ok(View {
                camera,
                target: ColorImage::read(&target)?,
            })
        })
        .collect()
}

fn load_transforms_scene(path: &Path) -> CliResult<Vec<View>> {
    // image size is needed for the intrinsics, so peek at the first frame's image
    let probe = load_transforms(path, 1, 1, TRANSFORMS_RANGE)?;
    let first = probe
        .first()
        .ok_or(csdf_core::Error::EmptyInput("scene has no frames"))?;
    let img = ColorImage::read(&first.image)?;
    load_transforms(path, img.width, img.height, TRANSFORMS_RANGE)?
        .into_iter()
        .map(|f| {
            Ok(View {
                target: ColorImage::read(&f.image)?,
                camera: f.camera,
            })
        })
        .collect()
}

fn fit_cmd(a: FitArgs, r: &mut Resolver) -> CliResult<()> {
    let views = load_scene(&a.scene)?;
    let heldout = match &a.heldout {
        Some(dir) => load_scene(dir)?,
        None => Vec::new(),
    };
    let initial = match &a.init_grid {
        Some(p) => {
            let g = read_grid(p)?;
            require_kind(&g, p, &[FieldKind::Occupancy])?;
            g
        }
        None => {
            let layout = GridLayout::cube(a.dims, a.bounds[0], a.bounds[1])?;
            r.record("dims", a.dims);
            r.record("bounds", format!("{},{}", a.bounds[0], a.bounds[1]));
            let init = r.pick("init", a.init, |c| c.init, DEFAULT_FIT_INIT);
            VoxelGrid::filled(layout, FieldKind::Occupancy, init)?
        }
    };
    let model = render_model(r, initial.layout(), &a.smoothing, &a.transfer, &a.render)?;
    let total_rays: usize = views.iter().map(|v| v.camera.pixel_count()).sum();
    let cfg = FitConfig {
        iterations: r.pick("iters", a.iters, |c| c.iters, DEFAULT_FIT_ITERS),
        learning_rate: r.pick("lr", a.lr, |c| c.lr, DEFAULT_FIT_LR),
        batch_rays: r.pick("batch", a.batch, |c| c.batch, total_rays),
        seed: r.pick("seed", a.seed, |c| c.seed, 0),
    };
    let (grid, report) = fit(&initial, &views, &heldout, &model, &cfg)?;
    write_grid(&grid, &a.out)?;

    let mut manifest = Manifest::new("fit");
    manifest.input("scene", &a.scene);
    if let Some(h) = &a.heldout {
        manifest.input("heldout", h);
    }
    if let Some(p) = &a.init_grid {
        manifest.input("init_grid", p);
    }
    manifest.output("grid", &a.out);
    let mut csv = String::from("iteration,loss\n");
    for (i, l) in report.loss_trace.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l}");
    }
    let _ = writeln!(csv, "# best_iteration = {}", report.best_iteration);
    if let Some(p) = report.heldout_psnr {
        let _ = writeln!(csv, "# heldout_psnr_db = {p}");
    }
    let _ = writeln!(csv, "# seconds = {:.3}", report.seconds);
    match &a.report {
        Some(p) => {
            write_text(p, &csv)?;
            manifest.output("report", p);
        }
        None => eprint!("{}", csv.lines().filter(|l| l.starts_with('#')).fold(String::new(), |s, l| s + l + "\n")),
    }
    manifest.write(r, &a.out)?;
    Ok(())
}

fn write_fixture(grid: &VoxelGrid, kind: &str, out: &Path, r: &mut Resolver) -> CliResult<()> {
    write_grid(grid, out)?;
    let l = grid.layout();
    r.record("shape", kind);
    r.record("dims", l.dims[0]);
    r.record("origin", format!("{},{},{}", l.origin.x, l.origin.y, l.origin.z));
    r.record("spacing", l.spacing);
    Manifest::new("make-fixture").output("grid", out).write(r, out)?;
    Ok(())
}

fn fmt3(v: [f64; 3]) -> String {
    format!("{},{},{}", v[0], v[1], v[2])
}

/// Unit view directions: the eight cube corners, then a Fibonacci spiral for any beyond.
pub fn training_directions(n: usize) -> Vec<Vector3<f64>> {
    let mut dirs: Vec<Vector3<f64>> = (0..8.min(n))
        .map(|s| {
            let sign = |bit: usize| if s & bit == 0 { 1.0 } else { -1.0 };
            Vector3::new(sign(1), sign(2), sign(4)).normalize()
        })
        .collect();
    let extra = n.saturating_sub(8);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..extra {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / extra as f64;
        let r = (1.0 - y * y).sqrt();
        let phi = golden * i as f64;
        dirs.push(Vector3::new(r * phi.cos(), y, r * phi.sin()));
    }
    dirs
}

/// Off-corner directions for held-out views.
pub fn heldout_directions(n: usize) -> Vec<Vector3<f64>> {
    const BASE: [[f64; 3]; 4] = [[1.0, 0.2, 0.1], [0.1, 1.0, 0.3], [-0.3, 0.1, 1.0], [-1.0, -0.4, 0.2]];
    (0..n)
        .map(|i| {
            let b = BASE[i % BASE.len()];
            let turn = (i / BASE.len()) as f64 * 0.7;
            let (s, c) = turn.sin_cos();
            Vector3::new(c * b[0] - s * b[2], b[1], s * b[0] + c * b[2]).normalize()
        })
        .collect()
}

/// Camera on a sphere of radius 2.2 around the origin looking at it, framing the unit cube.
pub fn orbit_camera(direction: Vector3<f64>, size: usize) -> CliResult<Camera> {
    let d = direction.normalize();
    let up = if d.y.abs() > 0.9 { Vector3::z() } else { Vector3::y() };
    Ok(Camera::look_at(
        Point3::from(d * 2.2),
        Point3::origin(),
        up,
        size,
        size,
        1.125 * size as f64,
        1.3,
        3.1,
    )?)
}

fn write_views(
    dir: &Path,
    truth: &VoxelGrid,
    model: &RenderModel,
    dirs: &[Vector3<f64>],
    size: usize,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let cameras = dirs
        .iter()
        .map(|d| orbit_camera(*d, size))
        .collect::<CliResult<Vec<_>>>()?;
    let views = model.make_views(truth, &cameras)?;
    let mut named = Vec::new();
    let mut written = Vec::new();
    for (i, v) in views.iter().enumerate() {
        let stem = format!("view_{i:03}");
        write_camera(&v.camera, dir.join(format!("{stem}.cam")))?;
        let img = dir.join(format!("{stem}.ppm"));
        v.target.write_ppm(&img)?;
        named.push((v.camera.clone(), format!("{stem}.ppm")));
        written.push(img);
    }
    let transforms = transforms_for(&named)?;
    let json = serde_json::to_string_pretty(&transforms)
        .map_err(|e| CliError::usage(format!("cannot serialize transforms: {e}")))?;
    write_text(&dir.join("transforms.json"), &json)?;
    Ok(written)
}

fn fixture_cmd(f: FixtureCommand, r: &mut Resolver) -> CliResult<()> {
    match f {
        FixtureCommand::Sphere {
            center,
            radius,
            layout,
            out,
        } => {
            r.record("center", fmt3(center));
            r.record("radius", radius);
            let shape = AnalyticShape::sphere(point(center), radius)?;
            let grid = make_analytic_grid(&shape, layout_of(&layout)?)?;
            write_fixture(&grid, "sphere", &out, r)
        }
        FixtureCommand::Box {
            min,
            max,
            layout,
            out,
        } => {
            r.record("min", fmt3(min));
            r.record("max", fmt3(max));
            let shape = AnalyticShape::aabb(point(min), point(max))?;
            let grid = make_analytic_grid(&shape, layout_of(&layout)?)?;
            write_fixture(&grid, "box", &out, r)
        }
        FixtureCommand::Halfspace {
            normal,
            offset,
            layout,
            out,
        } => {
            r.record("normal", fmt3(normal));
            r.record("offset", offset);
            let shape = AnalyticShape::halfspace(Vector3::from(normal), offset)?;
            let grid = make_analytic_grid(&shape, layout_of(&layout)?)?;
            write_fixture(&grid, "halfspace", &out, r)
        }
        FixtureCommand::Scene {
            radius,
            dims,
            views,
            heldout,
            size,
            out,
            smoothing,
            transfer,
            render,
        } => {
            if views == 0 {
                return Err(CliError::usage("a scene needs at least one training view"));
            }
            for (k, v) in [("radius", radius.to_string()), ("dims", dims.to_string())] {
                r.record(k, v);
            }
            r.record("views", views);
            r.record("heldout", heldout);
            r.record("size", size);
            let layout = GridLayout::unit_cube(dims)?;
            let truth =
                make_analytic_grid(&AnalyticShape::sphere(Point3::origin(), radius)?, layout)?;
            let model = render_model(r, &layout, &smoothing, &transfer, &render)?;
            fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let truth_path = out.join("truth.grid");
            write_grid(&truth, &truth_path)?;
            let mut manifest = Manifest::new("make-fixture scene");
            manifest.output("truth", &truth_path);
            for p in write_views(&out, &truth, &model, &training_directions(views), size)? {
                manifest.output("view", &p);
            }
            if heldout > 0 {
                let dir = out.join("heldout");
                for p in write_views(&dir, &truth, &model, &heldout_directions(heldout), size)? {
                    manifest.output("heldout", &p);
                }
            }
            manifest.write(r, &out)?;
            Ok(())
        }
    }
}

fn oracle_cmd(o: OracleCommand, r: &mut Resolver) -> CliResult<()> {
    match o {
        OracleCommand::Edt { input, out } => {
            let grid = read_grid(&input)?.binarize();
            let dt = exact_distance_transform(&grid)?;
            if dt.saturated {
                eprintln!("note: grid holds one class only; distances saturate");
            }
            write_grid(&dt.grid, &out)?;
            Manifest::new("oracle edt")
                .input("grid", &input)
                .output("grid", &out)
                .write(r, &out)?;
        }
        OracleCommand::SphereSdf {
            center,
            radius,
            layout,
            out,
        } => {
            let shape = AnalyticShape::sphere(point(center), radius)?;
            let grid = VoxelGrid::from_fn(layout_of(&layout)?, FieldKind::Distance, |p| {
                analytic_sdf(&shape, &p)
            })?;
            r.record("center", fmt3(center));
            r.record("radius", radius);
            write_fixture(&grid, "sphere-sdf", &out, r)?;
        }
    }
    Ok(())
}
