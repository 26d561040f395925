//! Acceptance suite: one PASS/FAIL line per criterion, exit status nonzero if any fail.
//!
//! Runs without the libtest harness so the lines print under a plain `cargo test`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use csdf_core::certify::{validate_convolution_vs_mc, weak_sdf, weak_sdf_at, DEFAULT_EPS_P};
use csdf_core::fit::{all_rays, fit, loss, loss_and_grad, FitConfig, RenderModel};
use csdf_core::grid::{make_analytic_grid, FieldKind, GridLayout, VoxelGrid};
use csdf_core::mesh::{marching_cubes, TriangleMesh};
use csdf_core::metrics::{
    chamfer, chamfer_brute_force, nearest_sq_distances, nearest_sq_distances_brute, sample_mesh,
    ChamferMode, PointCloud,
};
use csdf_core::oracle::{exact_distance_transform, sample_sphere_surface, AnalyticShape};
use csdf_core::render::{march_ray, Camera, GridDensity, Ray};
use csdf_core::smoothing::{smooth, SmoothingConfig, DEFAULT_TRUNCATION};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGMA_VOXELS: f64 = 1.1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn smoothing_for(layout: &GridLayout, sigma_voxels: f64) -> SmoothingConfig {
    SmoothingConfig::from_voxels(sigma_voxels, layout.spacing, DEFAULT_TRUNCATION).unwrap()
}

fn sphere(r: f64) -> AnalyticShape {
    AnalyticShape::sphere(Point3::origin(), r).unwrap()
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn convolution_matches_sampling() -> Outcome {
    let layout = GridLayout::unit_cube(64).unwrap();
    let grid = make_analytic_grid(&sphere(0.3), layout).unwrap();
    let cfg = smoothing_for(&layout, SIGMA_VOXELS);
    // probes in the band where the smoothed value is neither 0 nor 1
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let probes: Vec<_> = (0..64)
        .map(|_| Point3::from(random_direction(&mut rng) * rng.random_range(0.26..0.34)))
        .collect();
    let report = validate_convolution_vs_mc(&grid, &cfg, &probes, 100_000, 5).unwrap();
    let worst = report
        .probes
        .iter()
        .map(|p| if p.std_error > 0.0 { p.deviation / p.std_error } else { 0.0 })
        .fold(0.0, f64::max);
    // Diagnostic only: the gap is discretization of a narrow erf profile and shrinks as the
    // kernel widens. Pass/fail is decided at the required width above.
    let sweep: Vec<String> = [SIGMA_VOXELS, 2.0, 3.0, 4.0]
        .iter()
        .map(|&s| {
            let r = validate_convolution_vs_mc(&grid, &smoothing_for(&layout, s), &probes, 100_000, 5)
                .unwrap();
            let max_dev = r.probes.iter().map(|p| p.deviation).fold(0.0, f64::max);
            format!("sigma {s} voxels: max |dev| {max_dev:.4}, flagged {}", r.flagged)
        })
        .collect();
    outcome(
        report.flagged == 0,
        format!(
            "{}/64 probes beyond 4 binomial SE, worst {worst:.2} SE, n = 1e5 [{}]",
            report.flagged,
            sweep.join("; ")
        ),
    )
}

fn halfspace_is_exact() -> Outcome {
    let layout = GridLayout::unit_cube(64).unwrap();
    let h = layout.spacing;
    let shape = AnalyticShape::halfspace(Vector3::z(), 0.0).unwrap();
    let grid = make_analytic_grid(&shape, layout).unwrap();
    let cfg = smoothing_for(&layout, 2.0);
    let smoothed = smooth(&grid, &cfg).unwrap();
    let sigma = cfg.sigma_world;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for k in [0.5, 1.0, 1.5] {
        let d = k * sigma;
        let tol = (0.5 * h).max(0.05 * d);
        // occupied side is z >= 0, so +d inside and -d outside
        for (z, expected) in [(d, d), (-d, -d)] {
            let got = weak_sdf_at(&smoothed, &Point3::new(0.013, -0.021, z), DEFAULT_EPS_P);
            let err = (got - expected).abs();
            worst_excess = worst_excess.max(err - tol);
            lines.push(format!("{expected:+.4}->{got:+.4}"));
        }
    }
    outcome(worst_excess <= 0.0, format!("sigma = 2 voxels, {}", lines.join(" ")))
}

/// Magnitude bound: the certified radius never exceeds the distance to the nearest
/// opposite-class voxel center plus half a voxel. Returns checked voxels, violations and voxels
/// whose smoothed class differs from their own.
fn lower_bound_holds(grid: &VoxelGrid, cfg: &SmoothingConfig) -> (usize, usize, usize) {
    let smoothed = smooth(grid, cfg).unwrap();
    let sdf = weak_sdf(&smoothed, DEFAULT_EPS_P).unwrap();
    let edt = exact_distance_transform(grid).unwrap();
    let half = 0.5 * grid.spacing();
    let (mut checked, mut violations, mut flipped) = (0, 0, 0);
    for ((&w, &d), &f) in sdf
        .grid
        .values()
        .iter()
        .zip(edt.grid.values())
        .zip(smoothed.grid.values())
    {
        if (f - 0.5).abs() <= 1e-6 {
            continue;
        }
        checked += 1;
        if w.abs() > d.abs() + half {
            violations += 1;
        }
        if (w >= 0.0) != (d >= 0.0) {
            flipped += 1;
        }
    }
    (checked, violations, flipped)
}

fn weak_sdf_is_lower_bound() -> Outcome {
    let layout = GridLayout::unit_cube(64).unwrap();
    let cfg = smoothing_for(&layout, SIGMA_VOXELS);
    let box_shape = AnalyticShape::aabb(Point3::new(-0.25, -0.2, -0.15), Point3::new(0.2, 0.25, 0.3))
        .unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, shape) in [("sphere", sphere(0.3)), ("box", box_shape)] {
        let grid = make_analytic_grid(&shape, layout).unwrap();
        let (checked, violations, flipped) = lower_bound_holds(&grid, &cfg);
        pass &= violations == 0 && checked > 0;
        detail.push(format!(
            "{name}: {violations} violations in {checked} voxels ({flipped} boundary voxels change class under smoothing)"
        ));
    }
    outcome(pass, format!("|weak| <= |EDT| + h/2; {}", detail.join(", ")))
}

fn orbit(direction: Vector3<f64>, size: usize, distance: f64) -> Camera {
    let d = direction.normalize();
    let up = if d.y.abs() > 0.9 { Vector3::z() } else { Vector3::y() };
    Camera::look_at(
        Point3::from(d * distance),
        Point3::origin(),
        up,
        size,
        size,
        1.125 * size as f64,
        distance - 0.9,
        distance + 0.9,
    )
    .unwrap()
}

fn gradient_matches_finite_differences() -> Outcome {
    let layout = GridLayout::unit_cube(8).unwrap();
    let model = RenderModel::for_layout(&layout, SmoothingConfig::from_voxels(SIGMA_VOXELS, layout.spacing, 3.0).unwrap());
    let truth = make_analytic_grid(
        &AnalyticShape::sphere(Point3::new(0.05, 0.0, -0.05), 0.3).unwrap(),
        layout,
    )
    .unwrap();
    let cameras = [orbit(Vector3::new(1.0, 0.4, 0.3), 4, 2.0), orbit(Vector3::new(-0.2, 0.5, 1.0), 4, 2.0)];
    let views = model.make_views(&truth, &cameras).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values = (0..layout.len()).map(|_| rng.random_range(0.3..0.7)).collect();
    let grid = VoxelGrid::new(layout, FieldKind::Occupancy, values).unwrap();
    let rays = all_rays(&views);
    let (_, grad) = loss_and_grad(&grid, &views, &model, &rays).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < 50 {
        picked.insert(rng.random_range(0..grid.len()));
    }
    for &i in &picked {
        let shifted = |delta: f64| {
            let mut v = grid.values().to_vec();
            v[i] += delta;
            let g = grid.with_values(FieldKind::Scalar, v).unwrap();
            loss(&g, &views, &model, &rays).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an = grad.values()[i];
        let scale = fd.abs().max(an.abs());
        if scale < 1e-9 {
            continue;
        }
        compared += 1;
        worst = worst.max((fd - an).abs() / scale);
    }
    outcome(
        worst < 1e-3,
        format!("max relative error {worst:.2e} over 50 voxels ({compared} with nonzero gradient), 8^3 grid, 4x4 images"),
    )
}

fn quadrature_is_consistent() -> Outcome {
    let l = 0.4;
    let sigma0 = 2.0 / l;
    let slab = move |p: &Point3<f64>| if p.z >= l && p.z <= 2.0 * l { sigma0 } else { 0.0 };
    let ray = Ray {
        origin: Point3::new(0.1, -0.2, 0.0),
        direction: Vector3::z(),
        t_near: 0.0,
        t_far: 3.0 * l,
    };
    let opacity = march_ray(&ray, &slab, l / 100.0).opacity;
    let expected = 1.0 - (-sigma0 * l).exp();
    let slab_err = (opacity - expected).abs();

    let layout = GridLayout::unit_cube(64).unwrap();
    let grid = make_analytic_grid(&sphere(0.3), layout).unwrap();
    let smoothed = smooth(&grid, &smoothing_for(&layout, SIGMA_VOXELS)).unwrap();
    let field = GridDensity {
        smoothed: &smoothed,
        transfer: Default::default(),
    };
    let camera = orbit(Vector3::new(0.3, 0.5, 1.0), 64, 2.2);
    let step = 0.5 * layout.spacing;
    let mut bad_rays = 0;
    let mut hit_rays = 0;
    for i in 0..camera.pixel_count() {
        let m = march_ray(&camera.ray_at(i), &field, step);
        let monotone = m.transmittance.windows(2).all(|w| w[1] <= w[0])
            && m.transmittance.iter().all(|t| (0.0..=1.0).contains(t));
        if !monotone {
            bad_rays += 1;
        }
        if m.opacity > 0.5 {
            hit_rays += 1;
        }
    }
    outcome(
        slab_err <= 1e-3 && bad_rays == 0 && hit_rays > 0,
        format!(
            "slab opacity {opacity:.6} vs {expected:.6} (err {slab_err:.1e}); \
             {bad_rays}/4096 rays with rising transmittance, {hit_rays} rays hit"
        ),
    )
}

fn mean_radius(mesh: &TriangleMesh) -> f64 {
    mesh.vertices.iter().map(|v| v.coords.norm()).sum::<f64>() / mesh.vertices.len() as f64
}

/// Weak SDF mesh of the 96^3 sphere at isovalue 0, shared by criteria 6 and 7.
fn sphere_mesh_96() -> (TriangleMesh, VoxelGrid) {
    let layout = GridLayout::unit_cube(96).unwrap();
    let grid = make_analytic_grid(&sphere(0.3), layout).unwrap();
    let sdf = weak_sdf(&smooth(&grid, &smoothing_for(&layout, SIGMA_VOXELS)).unwrap(), DEFAULT_EPS_P)
        .unwrap();
    (marching_cubes(&sdf.grid, 0.0).unwrap(), sdf.grid)
}

fn mesh_fidelity(mesh: &TriangleMesh, sdf: &VoxelGrid) -> Outcome {
    let h = sdf.spacing();
    let r = 0.3;
    let near = mesh
        .vertices
        .iter()
        .filter(|v| (v.coords.norm() - r).abs() <= h)
        .count();
    let frac = near as f64 / mesh.vertices.len() as f64;
    let closed = mesh.is_closed();
    let offset = marching_cubes(sdf, -0.1 * h).unwrap();
    let (r0, r1) = (mean_radius(mesh), mean_radius(&offset));
    outcome(
        frac >= 0.99 && closed && offset.is_closed() && r1 > r0,
        format!(
            "{:.2}% of {} vertices within 1 spacing, closed {closed}; \
             mean radius {r0:.5} -> {r1:.5} at isovalue -0.1 voxel",
            100.0 * frac,
            mesh.vertices.len()
        ),
    )
}

fn chamfer_self_check(mesh: &TriangleMesh, spacing: f64) -> Outcome {
    let a = sample_mesh(mesh, 10_000, 1).unwrap();
    let b = PointCloud {
        points: sample_sphere_surface(Point3::origin(), 0.3, 10_000, 2),
        source: "analytic sphere".into(),
    };
    let d = chamfer(&a, &b, ChamferMode::Squared).unwrap();
    let bound = (1.5 * spacing).powi(2) * 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cloud = |n: usize| -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    };
    let (p, q) = (cloud(500), cloud(500));
    let exact_nn = nearest_sq_distances(&p, &q).unwrap() == nearest_sq_distances_brute(&p, &q).unwrap();
    let pc = |points: Vec<Point3<f64>>| PointCloud { points, source: String::new() };
    let (pa, pb) = (pc(p), pc(q));
    let exact_chamfer = chamfer(&pa, &pb, ChamferMode::Squared).unwrap()
        == chamfer_brute_force(&pa, &pb, ChamferMode::Squared).unwrap();
    outcome(
        d < bound && exact_nn && exact_chamfer,
        format!(
            "chamfer {d:.3e} < {bound:.3e}; k-d tree equals brute force at n = 500: {}",
            exact_nn && exact_chamfer
        ),
    )
}

fn end_to_end_fit() -> Outcome {
    let layout = GridLayout::unit_cube(32).unwrap();
    let h = layout.spacing;
    let smoothing = smoothing_for(&layout, SIGMA_VOXELS);
    let model = RenderModel::for_layout(&layout, smoothing);
    let truth = make_analytic_grid(&sphere(0.3), layout).unwrap();
    let corners: Vec<_> = (0..8)
        .map(|s: u32| {
            let sign = |bit: u32| if s & bit == 0 { 1.0 } else { -1.0 };
            orbit(Vector3::new(sign(1), sign(2), sign(4)), 32, 2.2)
        })
        .collect();
    let heldout_cams = [
        orbit(Vector3::new(1.0, 0.2, 0.1), 32, 2.2),
        orbit(Vector3::new(0.1, 1.0, 0.3), 32, 2.2),
    ];
    let views = model.make_views(&truth, &corners).unwrap();
    let heldout = model.make_views(&truth, &heldout_cams).unwrap();
    let initial = VoxelGrid::filled(layout, FieldKind::Occupancy, 0.5).unwrap();
    let cfg = FitConfig {
        iterations: 500,
        learning_rate: 0.1,
        batch_rays: usize::MAX,
        seed: 7,
    };
    let (fitted, report) = fit(&initial, &views, &heldout, &model, &cfg).unwrap();
    let psnr = report.heldout_psnr.unwrap();
    let sdf = weak_sdf(&smooth(&fitted, &smoothing).unwrap(), DEFAULT_EPS_P).unwrap();
    let mesh = marching_cubes(&sdf.grid, 0.0).unwrap();
    let d = if mesh.is_empty() {
        f64::INFINITY
    } else {
        let a = sample_mesh(&mesh, 10_000, 1).unwrap();
        let b = PointCloud {
            points: sample_sphere_surface(Point3::origin(), 0.3, 10_000, 2),
            source: String::new(),
        };
        chamfer(&a, &b, ChamferMode::Squared).unwrap()
    };
    let bound = (2.0 * h).powi(2);
    let trace = &report.loss_trace;
    outcome(
        psnr > 25.0 && d < bound && trace.len() == 500,
        format!(
            "held-out PSNR {psnr:.2} dB (> 25), weak SDF chamfer {d:.3e} (< {bound:.3e}), \
             loss {:.2e} -> {:.2e}",
            trace[0],
            trace[trace.len() - 1]
        ),
    )
}

fn csdf(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_csdf"))
        .args(["--threads", "1"])
        .args(args)
        .current_dir(dir)
        .status()
        .expect("csdf runs");
    assert!(status.success(), "csdf {args:?} failed with {status}");
}

fn pipeline(dir: &Path) {
    csdf(dir, &["make-fixture", "sphere", "--dims", "48", "--out", "s.grid"]);
    csdf(dir, &["sdf", "s.grid", "--out", "s.sdf.grid"]);
    csdf(dir, &["mesh", "s.sdf.grid", "--out", "s.ply"]);
    csdf(dir, &["make-fixture", "scene", "--dims", "16", "--views", "3", "--heldout", "1", "--size", "16", "--out", "scene"]);
    csdf(dir, &["render", "s.grid", "--camera", "scene/view_000.cam", "--out", "r.ppm"]);
    csdf(dir, &["fit", "scene", "--dims", "16", "--iters", "8", "--batch", "300", "--seed", "3", "--out", "fit.grid"]);
    csdf(dir, &["sdf", "fit.grid", "--binarize", "--out", "fit.sdf.grid"]);
    csdf(dir, &["mesh", "fit.sdf.grid", "--out", "fit.ply"]);
}

const ARTIFACTS: [&str; 10] = [
    "s.grid",
    "s.sdf.grid",
    "s.ply",
    "r.ppm",
    "scene/view_000.ppm",
    "scene/heldout/view_000.ppm",
    "fit.grid",
    "fit.sdf.grid",
    "fit.ply",
    "fit.grid.manifest.txt",
];

fn reruns_are_identical() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let differing: Vec<_> = ARTIFACTS
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} artifacts (grid, PPM, PLY, manifest) compared across two --threads 1 runs, differing: {differing:?}",
            ARTIFACTS.len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, limit: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        let timing = match limit {
            Some(limit) => {
                o.pass &= elapsed <= limit;
                format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs())
            }
            None => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        if !o.pass {
            failures += 1;
        }
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id} {name}: {}; {timing}", o.detail);
    };

    report(1, "convolution matches Monte-Carlo smoothing", Some(Duration::from_secs(60)), &mut convolution_matches_sampling);
    report(2, "weak SDF exact for a halfspace", None, &mut halfspace_is_exact);
    report(3, "weak SDF is a lower bound", None, &mut weak_sdf_is_lower_bound);
    report(4, "analytic gradient matches finite differences", None, &mut gradient_matches_finite_differences);
    report(5, "rendering quadrature", None, &mut quadrature_is_consistent);
    let mut shared = None;
    report(6, "mesh fidelity", Some(Duration::from_secs(60)), &mut || {
        let (mesh, sdf) = sphere_mesh_96();
        let o = mesh_fidelity(&mesh, &sdf);
        shared = Some((mesh, sdf.spacing()));
        o
    });
    report(7, "chamfer self-check", None, &mut || {
        let (mesh, spacing) = shared.take().unwrap_or_else(|| {
            let (m, g) = sphere_mesh_96();
            (m, g.spacing())
        });
        chamfer_self_check(&mesh, spacing)
    });
    report(8, "end-to-end fit", Some(Duration::from_secs(300)), &mut end_to_end_fit);
    report(9, "determinism", None, &mut reruns_are_identical);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
