//! Image and geometry metrics: PSNR and Chamfer distance between sampled point clouds.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::WorldPoint;
use crate::mesh::TriangleMesh;
use crate::render::ColorImage;

/// Reported in place of +∞ when two images are identical.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub db: f64,
    pub mse: f64,
    /// True when the value was capped at [`PSNR_CAP_DB`].
    pub capped: bool,
}

/// PSNR with peak 1 over all samples of two equally sized buffers.
pub fn psnr_values(a: &[f64], b: &[f64]) -> Result<Psnr> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "PSNR inputs have {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("PSNR of empty images"));
    }
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let mse = sse / a.len() as f64;
    let db = -10.0 * mse.log10();
    Ok(if db.is_finite() && db < PSNR_CAP_DB {
        Psnr { db, mse, capped: false }
    } else {
        Psnr { db: PSNR_CAP_DB, mse, capped: true }
    })
}

pub fn psnr(a: &ColorImage, b: &ColorImage) -> Result<Psnr> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::DimensionMismatch(format!(
            "PSNR of a {}x{} image against a {}x{} image",
            a.width, a.height, b.width, b.height
        )));
    }
    psnr_values(&a.data, &b.data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<WorldPoint>,
    /// Where the points came from, e.g. the mesh file, sample count and seed.
    pub source: String,
}

/// Uniform samples on the mesh surface: triangles by area, then uniform barycentric coordinates.
pub fn sample_mesh(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::EmptyInput("cannot sample an empty mesh"));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    mesh.validate()?;
    let areas = mesh.triangle_areas();
    let pick = WeightedIndex::new(&areas)
        .map_err(|e| Error::InvalidShape(format!("mesh has no area to sample: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let t = mesh.triangles[pick.sample(&mut rng)];
            let [a, b, c] = t.map(|i| mesh.vertices[i]);
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect();
    Ok(PointCloud {
        points,
        source: format!("mesh samples n={n} seed={seed}"),
    })
}

#[inline]
fn sq_dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) + (p[2] - q[2]) * (p[2] - q[2])
}

fn as_arrays(points: &[WorldPoint]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

const LEAF_SIZE: usize = 16;

enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<KdNode>, right: Box<KdNode> },
}

/// Static k-d tree over a point set; splits at the median of the widest axis.
pub struct KdTree {
    points: Vec<[f64; 3]>,
    root: KdNode,
}

impl KdTree {
    pub fn new(points: &[WorldPoint]) -> Self {
        let mut points = as_arrays(points);
        let n = points.len();
        let root = Self::build(&mut points, 0, n);
        KdTree { points, root }
    }

    fn build(points: &mut [[f64; 3]], start: usize, end: usize) -> KdNode {
        let slice = &mut points[start..end];
        if slice.len() <= LEAF_SIZE {
            return KdNode::Leaf { start, end };
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in slice.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] <= lo[axis] {
            // all points coincide
            return KdNode::Leaf { start, end };
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |p, q| p[axis].total_cmp(&q[axis]));
        let value = slice[mid][axis];
        let left = Box::new(Self::build(points, start, start + mid));
        let right = Box::new(Self::build(points, start + mid, end));
        KdNode::Split { axis, value, left, right }
    }

    /// Smallest squared distance from `q` to the stored points.
    pub fn nearest_sq(&self, q: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        best
    }

    fn search(&self, node: &KdNode, q: &[f64; 3], best: &mut f64) {
        match node {
            KdNode::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    *best = best.min(sq_dist(q, p));
                }
            }
            KdNode::Split { axis, value, left, right } => {
                // left holds coordinates <= value, right holds >= value
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Squared distance from each query to its nearest reference point, via a k-d tree.
pub fn nearest_sq_distances(queries: &[WorldPoint], reference: &[WorldPoint]) -> Result<Vec<f64>> {
    if queries.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("nearest-neighbor query on an empty point cloud"));
    }
    let tree = KdTree::new(reference);
    Ok(queries.par_iter().map(|q| tree.nearest_sq(&[q.x, q.y, q.z])).collect())
}

/// Exhaustive version of [`nearest_sq_distances`].
pub fn nearest_sq_distances_brute(
    queries: &[WorldPoint],
    reference: &[WorldPoint],
) -> Result<Vec<f64>> {
    if queries.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("nearest-neighbor query on an empty point cloud"));
    }
    let refs = as_arrays(reference);
    Ok(queries
        .par_iter()
        .map(|q| {
            let q = [q.x, q.y, q.z];
            refs.iter().map(|r| sq_dist(&q, r)).fold(f64::INFINITY, f64::min)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferMode {
    /// Mean squared nearest distances, summed over both directions.
    #[default]
    Squared,
    /// Mean unsquared nearest distances, summed over both directions.
    Root,
}

fn mean_term(sq: &[f64], mode: ChamferMode) -> f64 {
    let sum: f64 = match mode {
        ChamferMode::Squared => sq.iter().sum(),
        ChamferMode::Root => sq.iter().map(|d| d.sqrt()).sum(),
    };
    sum / sq.len() as f64
}

pub fn chamfer(a: &PointCloud, b: &PointCloud, mode: ChamferMode) -> Result<f64> {
    let ab = nearest_sq_distances(&a.points, &b.points)?;
    let ba = nearest_sq_distances(&b.points, &a.points)?;
    Ok(mean_term(&ab, mode) + mean_term(&ba, mode))
}

pub fn chamfer_brute_force(a: &PointCloud, b: &PointCloud, mode: ChamferMode) -> Result<f64> {
    let ab = nearest_sq_distances_brute(&a.points, &b.points)?;
    let ba = nearest_sq_distances_brute(&b.points, &a.points)?;
    Ok(mean_term(&ab, mode) + mean_term(&ba, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;
    use rand_distr::StandardNormal;

    fn cloud(points: Vec<WorldPoint>) -> PointCloud {
        PointCloud {
            points,
            source: "test".into(),
        }
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud(
            (0..n)
                .map(|_| Point3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.random()))
                .collect(),
        )
    }

    #[test]
    fn psnr_closed_forms() {
        let a = ColorImage::filled(4, 3, [0.5; 3]);
        let b = ColorImage::filled(4, 3, [0.6; 3]);
        let p = psnr(&a, &b).unwrap();
        assert!((p.mse - 0.01).abs() < 1e-15);
        assert!((p.db - 20.0).abs() < 1e-9);
        assert!(!p.capped);

        let same = psnr(&a, &a).unwrap();
        assert!(same.capped && same.db == PSNR_CAP_DB && same.mse == 0.0);

        let mut check = ColorImage::filled(4, 4, [0.0; 3]);
        let mut inverse = ColorImage::filled(4, 4, [1.0; 3]);
        for y in 0..4 {
            for x in 0..4 {
                let v = ((x + y) % 2) as f64;
                check.set_pixel(x, y, [v; 3]);
                inverse.set_pixel(x, y, [1.0 - v; 3]);
            }
        }
        assert_eq!(psnr(&check, &inverse).unwrap().db, 0.0);
        assert!(psnr(&a, &check).is_err());
    }

    #[test]
    fn psnr_falls_as_noise_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.2..0.8)).collect();
        let mut last = f64::INFINITY;
        for sd in [0.01, 0.02, 0.05, 0.1] {
            let noisy: Vec<f64> = base
                .iter()
                .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let db = psnr_values(&base, &noisy).unwrap().db;
            assert!(db < last);
            last = db;
        }
    }

    #[test]
    fn samples_are_uniform_on_a_triangle() {
        let mesh = TriangleMesh {
            vertices: vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            triangles: vec![[0, 1, 2]],
        };
        let pc = sample_mesh(&mesh, 10_000, 7).unwrap();
        let mean = pc.points.iter().fold(Point3::origin().coords, |acc, p| acc + p.coords)
            / pc.points.len() as f64;
        assert!((mean - Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0).coords).norm() < 0.02);
        assert!(pc.points.iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-12));
        assert_eq!(sample_mesh(&mesh, 1, 3).unwrap(), sample_mesh(&mesh, 1, 3).unwrap());
    }

    #[test]
    fn triangles_are_picked_by_area() {
        // areas 1 and 3
        let mesh = TriangleMesh {
            vertices: vec![
                Point3::origin(),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 5.0),
                Point3::new(6.0, 0.0, 5.0),
                Point3::new(0.0, 1.0, 5.0),
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        };
        let n = 40_000;
        let pc = sample_mesh(&mesh, n, 11).unwrap();
        let first = pc.points.iter().filter(|p| p.z < 2.5).count() as f64;
        let (p, nf) = (0.25, n as f64);
        assert!((first - p * nf).abs() < 4.0 * (nf * p * (1.0 - p)).sqrt());
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(sample_mesh(&TriangleMesh::default(), 10, 0).is_err());
        let a = random_cloud(3, 1);
        assert!(chamfer(&a, &cloud(vec![]), ChamferMode::Squared).is_err());
    }

    #[test]
    fn chamfer_definitions() {
        let a = random_cloud(50, 2);
        assert_eq!(chamfer(&a, &a, ChamferMode::Squared).unwrap(), 0.0);
        let p = cloud(vec![Point3::new(0.0, 0.0, 0.0)]);
        let q = cloud(vec![Point3::new(0.0, 0.3, 0.4)]);
        assert!((chamfer(&p, &q, ChamferMode::Squared).unwrap() - 0.5).abs() < 1e-15);
        assert!((chamfer(&p, &q, ChamferMode::Root).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn accelerated_matches_brute_force() {
        let a = random_cloud(500, 5);
        let b = random_cloud(500, 6);
        assert_eq!(
            nearest_sq_distances(&a.points, &b.points).unwrap(),
            nearest_sq_distances_brute(&a.points, &b.points).unwrap()
        );
        for mode in [ChamferMode::Squared, ChamferMode::Root] {
            let fast = chamfer(&a, &b, mode).unwrap();
            assert_eq!(fast, chamfer_brute_force(&a, &b, mode).unwrap());
            assert_eq!(fast, chamfer(&b, &a, mode).unwrap());
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        // many identical coordinates stress k-d tree splitting
        let a = cloud(vec![Point3::new(0.5, 0.5, 0.5); 200]);
        let b = random_cloud(100, 9);
        assert_eq!(
            chamfer(&a, &b, ChamferMode::Squared).unwrap(),
            chamfer_brute_force(&a, &b, ChamferMode::Squared).unwrap()
        );
    }

    #[test]
    fn coplanar_and_gridded_references() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plane = cloud((0..3000).map(|_| Point3::new(rng.random(), rng.random(), 0.0)).collect());
        let lattice = cloud(
            (0..3000)
                .map(|i| Point3::new((i % 7) as f64, ((i / 7) % 5) as f64, rng.random()))
                .collect(),
        );
        let probes = random_cloud(400, 3);
        for reference in [&plane, &lattice] {
            assert_eq!(
                nearest_sq_distances(&probes.points, &reference.points).unwrap(),
                nearest_sq_distances_brute(&probes.points, &reference.points).unwrap()
            );
        }
    }
}
