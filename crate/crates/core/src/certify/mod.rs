//! Certified radii and the weak SDF.
//!
//! For a binary occupancy classifier smoothed by isotropic Gaussian noise of width σ, the
//! smoothed prediction at `x` cannot change within radius `σ·Φ⁻¹(p)`, where `p` is the
//! probability of the majority class. Since `f̂ = f * N(0, σ²I)` is exactly the probability of
//! class 1, `σ·Φ⁻¹(f̂(x))` is a signed lower bound on the distance to the surface: positive
//! inside occupied space, negative outside.
//!
//! The guarantee holds for binary grids. Soft grids produce the same formula but their
//! convolution is an expectation of the soft field, not a class probability, so their output
//! is flagged as heuristic.

mod normal;

pub use normal::{inverse_normal_cdf, normal_cdf, normal_pdf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, VoxelGrid, WorldPoint};
use crate::smoothing::{smooth, SmoothedGrid, SmoothingConfig};

/// Probability clamp applied before Φ⁻¹; saturates |SDF| at about 4.75σ.
pub const DEFAULT_EPS_P: f64 = 1e-6;

/// Signed certified radii in world units, positive inside.
#[derive(Debug, Clone)]
pub struct WeakSdfGrid {
    pub grid: VoxelGrid,
    pub sigma_world: f64,
    pub eps_p: f64,
    /// True when computed from a binary grid; otherwise the values are heuristic.
    pub guaranteed: bool,
}

impl WeakSdfGrid {
    /// Largest magnitude the clamp allows: `σ·Φ⁻¹(1 − eps_p)`.
    pub fn ceiling(&self) -> f64 {
        saturation_distance(self.sigma_world, self.eps_p)
    }
}

pub fn saturation_distance(sigma_world: f64, eps_p: f64) -> f64 {
    sigma_world * -inverse_normal_cdf(eps_p).unwrap_or(f64::NAN)
}

fn check_eps_p(eps_p: f64) -> Result<()> {
    if eps_p > 0.0 && eps_p < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "probability clamp must lie in (0, 0.5), got {eps_p}"
        )))
    }
}

/// `σ·Φ⁻¹(clamp(p, eps_p, 1 − eps_p))`.
#[inline]
pub fn certified_radius(probability: f64, sigma_world: f64, eps_p: f64) -> f64 {
    // both clamp ends share one quantile evaluation so the ceiling is exactly symmetric
    if probability <= eps_p {
        return -saturation_distance(sigma_world, eps_p);
    }
    if probability >= 1.0 - eps_p {
        return saturation_distance(sigma_world, eps_p);
    }
    if probability == 0.5 {
        return 0.0;
    }
    sigma_world * inverse_normal_cdf(probability).expect("clamped probability is inside (0, 1)")
}

/// Voxelwise weak SDF of a smoothed occupancy grid.
pub fn weak_sdf(smoothed: &SmoothedGrid, eps_p: f64) -> Result<WeakSdfGrid> {
    check_eps_p(eps_p)?;
    smoothed.config.validate()?;
    let sigma = smoothed.config.sigma_world;
    let values = smoothed
        .grid
        .values()
        .par_iter()
        .map(|&f| certified_radius(f, sigma, eps_p))
        .collect();
    Ok(WeakSdfGrid {
        grid: smoothed.grid.with_values(FieldKind::WeakSdf, values)?,
        sigma_world: sigma,
        eps_p,
        guaranteed: smoothed.binary_source,
    })
}

/// Weak SDF at an arbitrary point, from the trilinearly interpolated smoothed field.
pub fn weak_sdf_at(smoothed: &SmoothedGrid, p: &WorldPoint, eps_p: f64) -> f64 {
    certified_radius(smoothed.sample(p), smoothed.config.sigma_world, eps_p)
}

/// Settings for Monte-Carlo certification of single points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub sigma_world: f64,
    pub n_samples: usize,
    /// Failure probability of the one-sided confidence bound.
    pub alpha_conf: f64,
    pub eps_p: f64,
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_world.is_finite() && self.sigma_world > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma_world
            )));
        }
        if self.n_samples < 100 {
            return Err(Error::InvalidConfig(format!(
                "at least 100 samples required, got {}",
                self.n_samples
            )));
        }
        if !(self.alpha_conf > 0.0 && self.alpha_conf < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha_conf
            )));
        }
        check_eps_p(self.eps_p)
    }

    /// Hoeffding half-width `sqrt(ln(1/α) / 2n)`.
    pub fn hoeffding_margin(&self) -> f64 {
        ((1.0 / self.alpha_conf).ln() / (2.0 * self.n_samples as f64)).sqrt()
    }
}

/// Outcome of sampling-based certification at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct McCertificate {
    pub point: WorldPoint,
    pub n_samples: usize,
    /// Majority class under noise.
    pub class: u8,
    /// Empirical frequency of the majority class.
    pub p_hat: f64,
    /// One-sided lower confidence bound on the majority probability.
    pub p_lower: f64,
    /// Signed certified radius from `p_lower`; 0 when abstaining.
    pub radius_lower: f64,
    pub confidence: f64,
    /// Set when `p_lower <= 1/2`: no class can be certified.
    pub abstained: bool,
}

/// Deterministic noise stream for probe `stream` under `seed`.
fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of noisy copies of `p` classified as occupied.
fn count_occupied(grid: &VoxelGrid, p: &WorldPoint, sigma: f64, n: usize, rng: &mut ChaCha8Rng) -> usize {
    (0..n)
        .filter(|_| {
            let e = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            grid.hard_classify(&(p + e * sigma)) == 1
        })
        .count()
}

/// Randomized-smoothing certification of `p` by sampling, using substream `stream` of the seed.
pub fn certify_monte_carlo(
    grid: &VoxelGrid,
    p: &WorldPoint,
    cfg: &McConfig,
    stream: u64,
) -> Result<McCertificate> {
    cfg.validate()?;
    let mut rng = probe_rng(cfg.seed, stream);
    let n = cfg.n_samples;
    let ones = count_occupied(grid, p, cfg.sigma_world, n, &mut rng);
    let class = u8::from(2 * ones >= n);
    let top = if class == 1 { ones } else { n - ones };
    let p_hat = top as f64 / n as f64;
    let p_lower = (p_hat - cfg.hoeffding_margin()).max(0.0);
    let abstained = p_lower <= 0.5;
    let radius_lower = if abstained {
        0.0
    } else {
        let r = certified_radius(p_lower, cfg.sigma_world, cfg.eps_p);
        if class == 1 {
            r
        } else {
            -r
        }
    };
    Ok(McCertificate {
        point: *p,
        n_samples: n,
        class,
        p_hat,
        p_lower,
        radius_lower,
        confidence: 1.0 - cfg.alpha_conf,
        abstained,
    })
}

/// Agreement between the convolved grid and direct sampling at one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeAgreement {
    pub point: WorldPoint,
    /// Convolved grid, trilinearly sampled.
    pub fhat: f64,
    /// Sampled frequency of class 1 under noise.
    pub p_hat: f64,
    /// Binomial standard error at the convolved value, `sqrt(f̂(1 − f̂)/n)`.
    pub std_error: f64,
    pub deviation: f64,
    /// Deviation above four standard errors.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub probes: Vec<ProbeAgreement>,
    pub n_samples: usize,
    pub max_deviation: f64,
    pub flagged: usize,
}

/// Number of standard errors a probe may deviate before it is flagged.
pub const AGREEMENT_SIGMAS: f64 = 4.0;

/// Compares `f̂` from convolution with the sampled probability `P(f(x + ε) = 1)` at each probe.
pub fn validate_convolution_vs_mc(
    grid: &VoxelGrid,
    cfg: &SmoothingConfig,
    probes: &[WorldPoint],
    n: usize,
    seed: u64,
) -> Result<AgreementReport> {
    if !grid.is_binary() {
        return Err(Error::InvalidGrid(
            "convolution/sampling agreement is only defined for binary grids".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let smoothed = smooth(grid, cfg)?;
    let rows: Vec<ProbeAgreement> = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = probe_rng(seed, i as u64);
            let ones = count_occupied(grid, p, cfg.sigma_world, n, &mut rng);
            let p_hat = ones as f64 / n as f64;
            let fhat = smoothed.sample(p);
            let std_error = (fhat * (1.0 - fhat) / n as f64).sqrt();
            let deviation = (fhat - p_hat).abs();
            ProbeAgreement {
                point: *p,
                fhat,
                p_hat,
                std_error,
                deviation,
                flagged: deviation > AGREEMENT_SIGMAS * std_error,
            }
        })
        .collect();
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(AgreementReport {
        probes: rows,
        n_samples: n,
        max_deviation,
        flagged,
    })
}
