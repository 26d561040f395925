//! Gaussian smoothing of occupancy grids.
//!
//! The smoothed field `f̂ = f * N(0, σ²I)` is evaluated on the voxel lattice by three 1D
//! passes with a sampled, renormalized Gaussian. Reads past the grid edge see empty space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridLayout, VoxelGrid};

/// Default smoothing width, in voxels.
pub const DEFAULT_SIGMA_VOXELS: f64 = 1.1;
/// Default kernel cutoff in multiples of sigma.
pub const DEFAULT_TRUNCATION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Standard deviation in world units.
    pub sigma_world: f64,
    /// Kernel cutoff in multiples of sigma.
    pub truncation: f64,
}

impl SmoothingConfig {
    pub fn new(sigma_world: f64, truncation: f64) -> Result<Self> {
        let cfg = SmoothingConfig {
            sigma_world,
            truncation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sigma given in voxels of a grid with the given spacing.
    pub fn from_voxels(sigma_voxels: f64, spacing: f64, truncation: f64) -> Result<Self> {
        Self::new(sigma_voxels * spacing, truncation)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_world.is_finite() && self.sigma_world > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma_world
            )));
        }
        if !(self.truncation.is_finite() && self.truncation >= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "truncation must be at least 2, got {}",
                self.truncation
            )));
        }
        Ok(())
    }

    pub fn sigma_voxels(&self, spacing: f64) -> f64 {
        self.sigma_world / spacing
    }

    /// The 1D kernel for a grid layout, rejected if it is longer than any axis.
    pub fn kernel_for(&self, layout: &GridLayout) -> Result<Vec<f64>> {
        self.validate()?;
        let kernel = gaussian_kernel_1d(self.sigma_voxels(layout.spacing), self.truncation)?;
        for (axis, &axis_len) in layout.dims.iter().enumerate() {
            if kernel.len() > axis_len {
                return Err(Error::KernelTooLarge {
                    kernel_len: kernel.len(),
                    axis,
                    axis_len,
                });
            }
        }
        Ok(kernel)
    }
}

/// Smoothed occupancy plus the configuration that produced it.
#[derive(Debug, Clone)]
pub struct SmoothedGrid {
    pub grid: VoxelGrid,
    pub config: SmoothingConfig,
    /// Whether the input grid was binary, which is what certification guarantees require.
    pub binary_source: bool,
}

impl SmoothedGrid {
    pub fn sample(&self, p: &crate::grid::WorldPoint) -> f64 {
        self.grid.sample_trilinear(p)
    }
}

/// Gaussian weights at integer offsets `-r..=r`, `r = floor(truncation * sigma)`, summing to one.
///
/// Widths below `1 / truncation` voxels collapse to the delta kernel `[1.0]`.
pub fn gaussian_kernel_1d(sigma_voxels: f64, truncation: f64) -> Result<Vec<f64>> {
    if !(sigma_voxels.is_finite() && sigma_voxels > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kernel sigma must be positive, got {sigma_voxels}"
        )));
    }
    if !(truncation.is_finite() && truncation > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kernel truncation must be positive, got {truncation}"
        )));
    }
    let radius = (truncation * sigma_voxels).floor() as usize;
    let inv = 1.0 / (2.0 * sigma_voxels * sigma_voxels);
    let mut w: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x * inv).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    // exact symmetry after rounding
    for i in 0..radius {
        let m = w[i];
        w[2 * radius - i] = m;
    }
    Ok(w)
}

/// Zero-filled separable convolution with a symmetric odd-length kernel, applied along x, y, z.
///
/// The operator is symmetric (self-adjoint), so the same call back-propagates gradients.
pub fn convolve_separable(values: &[f64], dims: [usize; 3], kernel: &[f64]) -> Vec<f64> {
    let mut cur = values.to_vec();
    for axis in 0..3 {
        cur = convolve_axis(&cur, dims, kernel, axis);
    }
    cur
}

fn convolve_axis(input: &[f64], dims: [usize; 3], kernel: &[f64], axis: usize) -> Vec<f64> {
    let [nx, ny, _] = dims;
    let strides = [1, nx, nx * ny];
    let stride = strides[axis];
    let n = dims[axis] as isize;
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; input.len()];
    let slab = nx * ny;
    out.par_chunks_mut(slab).enumerate().for_each(|(k, plane)| {
        for (local, slot) in plane.iter_mut().enumerate() {
            let idx = k * slab + local;
            let c = [local % nx, local / nx, k][axis] as isize;
            let mut acc = 0.0;
            for (t, &w) in kernel.iter().enumerate() {
                let off = t as isize - r;
                let q = c + off;
                if q >= 0 && q < n {
                    acc += w * input[(idx as isize + off * stride as isize) as usize];
                }
            }
            *slot = acc;
        }
    });
    out
}

/// Separable Gaussian smoothing with zero fill; output values clamped to `[0, 1]` to absorb rounding.
pub fn smooth(grid: &VoxelGrid, cfg: &SmoothingConfig) -> Result<SmoothedGrid> {
    let kernel = cfg.kernel_for(grid.layout())?;
    let values = convolve_separable(grid.values(), grid.dims(), &kernel);
    finish(grid, cfg, values)
}

/// Full 3D convolution with the product kernel. Same contract as [`smooth`]; for testing.
pub fn smooth_direct_reference(grid: &VoxelGrid, cfg: &SmoothingConfig) -> Result<SmoothedGrid> {
    let kernel = cfg.kernel_for(grid.layout())?;
    let layout = *grid.layout();
    let r = (kernel.len() / 2) as isize;
    let src = grid.values();
    let dims = layout.dims.map(|d| d as isize);
    let values = (0..layout.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = layout.coords(idx).map(|c| c as isize);
            let mut acc = 0.0;
            for (c, &wz) in kernel.iter().enumerate() {
                let z = k + c as isize - r;
                if z < 0 || z >= dims[2] {
                    continue;
                }
                for (b, &wy) in kernel.iter().enumerate() {
                    let y = j + b as isize - r;
                    if y < 0 || y >= dims[1] {
                        continue;
                    }
                    for (a, &wx) in kernel.iter().enumerate() {
                        let x = i + a as isize - r;
                        if x < 0 || x >= dims[0] {
                            continue;
                        }
                        acc += wx * wy * wz
                            * src[layout.index(x as usize, y as usize, z as usize)];
                    }
                }
            }
            acc
        })
        .collect();
    finish(grid, cfg, values)
}

fn finish(grid: &VoxelGrid, cfg: &SmoothingConfig, values: Vec<f64>) -> Result<SmoothedGrid> {
    Ok(SmoothedGrid {
        grid: grid.with_values(FieldKind::Smoothed, values)?,
        config: *cfg,
        binary_source: grid.is_binary(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use crate::certify::normal_cdf;
    use crate::grid::make_analytic_grid;
    use crate::oracle::AnalyticShape;

    fn random_grid(n: usize, seed: u64) -> VoxelGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = GridLayout::unit_cube(n).unwrap();
        let values = (0..layout.len()).map(|_| rng.random::<f64>()).collect();
        VoxelGrid::new(layout, FieldKind::Occupancy, values).unwrap()
    }

    #[test]
    fn tiny_sigma_is_delta() {
        assert_eq!(gaussian_kernel_1d(0.2, 4.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn unit_sigma_kernel_shape() {
        let w = gaussian_kernel_1d(1.0, 4.0).unwrap();
        assert_eq!(w.len(), 9);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..4 {
            assert_eq!(w[i], w[8 - i]);
        }
        // exp(-1/2), preserved by renormalization
        assert!((w[3] / w[4] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((w[5] / w[4] - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn kernel_longer_than_axis_is_rejected() {
        let layout = GridLayout::unit_cube(8).unwrap();
        let cfg = SmoothingConfig::from_voxels(1.1, layout.spacing, 4.0).unwrap();
        let g = VoxelGrid::filled(layout, FieldKind::Occupancy, 0.5).unwrap();
        match smooth(&g, &cfg) {
            Err(Error::KernelTooLarge { kernel_len: 9, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(SmoothingConfig::new(0.1, 1.5).is_err());
        assert!(SmoothingConfig::new(-0.1, 4.0).is_err());
    }

    #[test]
    fn constant_ones_stay_one_away_from_boundary() {
        let layout = GridLayout::unit_cube(24).unwrap();
        let g = VoxelGrid::filled(layout, FieldKind::Occupancy, 1.0).unwrap();
        let cfg = SmoothingConfig::from_voxels(1.5, layout.spacing, 4.0).unwrap();
        let s = smooth(&g, &cfg).unwrap();
        assert!((s.grid.get(12, 12, 12) - 1.0).abs() < 1e-6);
        // zero fill pulls the corners down
        assert!(s.grid.get(0, 0, 0) < 0.5);
        let zeros = VoxelGrid::filled(layout, FieldKind::Occupancy, 0.0).unwrap();
        assert!(smooth(&zeros, &cfg).unwrap().grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn halfspace_smooths_to_normal_cdf() {
        let layout = GridLayout::unit_cube(48).unwrap();
        let h = layout.spacing;
        let half = AnalyticShape::halfspace(Vector3::z(), 0.0).unwrap();
        let g = make_analytic_grid(&half, layout).unwrap();
        for sigma_vox in [1.5, 2.0, 3.0] {
            let cfg = SmoothingConfig::from_voxels(sigma_vox, h, 4.0).unwrap();
            let s = smooth(&g, &cfg).unwrap();
            let reach = (cfg.truncation * sigma_vox).floor() as usize;
            // the occupied side touches the top face, where zero fill pulls values down
            for k in 0..48 - reach {
                // binary boundary sits halfway between voxel centers, at z = 0
                let z = layout.voxel_center(24, 24, k).z;
                let expected = normal_cdf(z / cfg.sigma_world);
                let got = s.grid.get(24, 24, k);
                assert!((got - expected).abs() < 1e-2, "sigma {sigma_vox} k {k}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn separable_equals_direct_on_random_grids() {
        for (n, sigma, trunc) in [(16, 1.1, 4.0), (16, 2.0, 3.0), (32, 1.1, 4.0)] {
            let g = random_grid(n, n as u64);
            let cfg = SmoothingConfig::from_voxels(sigma, g.spacing(), trunc).unwrap();
            let a = smooth(&g, &cfg).unwrap();
            let b = smooth_direct_reference(&g, &cfg).unwrap();
            let max = a
                .grid
                .values()
                .iter()
                .zip(b.grid.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(max <= 1e-6, "{max}");
        }
    }

    #[test]
    fn delta_kernel_and_ones_agree_with_reference() {
        let g = random_grid(8, 3);
        let delta = SmoothingConfig::from_voxels(0.2, g.spacing(), 4.0).unwrap();
        assert_eq!(smooth(&g, &delta).unwrap().grid.values(), g.values());
        assert_eq!(
            smooth_direct_reference(&g, &delta).unwrap().grid.values(),
            g.values()
        );
        let ones = VoxelGrid::filled(*g.layout(), FieldKind::Occupancy, 1.0).unwrap();
        let cfg = SmoothingConfig::from_voxels(1.0, g.spacing(), 3.0).unwrap();
        let a = smooth(&ones, &cfg).unwrap();
        let b = smooth_direct_reference(&ones, &cfg).unwrap();
        for (x, y) in a.grid.values().iter().zip(b.grid.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = [6, 5, 7];
        let n = 6 * 5 * 7;
        let kernel = gaussian_kernel_1d(0.9, 2.5).unwrap();
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let au = convolve_separable(&u, dims, &kernel);
        let av = convolve_separable(&v, dims, &kernel);
        let lhs: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&av).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_convolution_of_soft_field() {
        // E[f(p + eps)] over Gaussian eps, f the trilinear field, vs the trilinear smoothed grid.
        // Interpolating f^ between voxel centers costs O((h / sigma)^2); at 3 voxels that stays
        // under 4 standard errors of 1e5 draws.
        let layout = GridLayout::unit_cube(32).unwrap();
        let sphere = AnalyticShape::sphere(Point3::origin(), 0.3).unwrap();
        let g = make_analytic_grid(&sphere, layout).unwrap();
        let cfg = SmoothingConfig::from_voxels(3.0, layout.spacing, 4.0).unwrap();
        let s = smooth(&g, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        for _ in 0..8 {
            let dir = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
            .normalize();
            let p = Point3::from(dir * rng.random_range(0.24..0.36));
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let e = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * cfg.sigma_world;
                let v = g.sample_trilinear(&(p + e));
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / n as f64;
            let var = (sum2 / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let fhat = s.sample(&p);
            assert!((mean - fhat).abs() <= 4.0 * se, "{mean} vs {fhat} (se {se})");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn smoothing_is_monotone_and_mass_nonincreasing(
            a in proptest::collection::vec(0.0f64..=1.0, 216),
            bump in proptest::collection::vec(0.0f64..=0.5, 216),
            sigma in 0.4f64..1.2,
        ) {
            let layout = GridLayout::unit_cube(6).unwrap();
            let ga = VoxelGrid::new(layout, FieldKind::Occupancy, a.clone()).unwrap();
            let b: Vec<f64> = a.iter().zip(&bump).map(|(x, d)| (x + d).min(1.0)).collect();
            let gb = VoxelGrid::new(layout, FieldKind::Occupancy, b).unwrap();
            let cfg = SmoothingConfig::from_voxels(sigma, layout.spacing, 2.0).unwrap();
            let sa = smooth(&ga, &cfg).unwrap();
            let sb = smooth(&gb, &cfg).unwrap();
            for (x, y) in sa.grid.values().iter().zip(sb.grid.values()) {
                prop_assert!(*x <= *y + 1e-12);
                prop_assert!((0.0..=1.0).contains(x));
            }
            let before: f64 = ga.values().iter().sum();
            let after: f64 = sa.grid.values().iter().sum();
            prop_assert!(after <= before + 1e-9);
        }
    }
}
