//! Standard normal distribution helpers.

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Φ(z), accurate in both tails.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p): Acklam's rational approximation followed by one Newton step on Φ.
///
/// The upper half is evaluated through the reflection `Φ⁻¹(p) = -Φ⁻¹(1 - p)`, where `1 - p`
/// is exact, so the Newton residual is never computed against a rounded complement.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "inverse normal CDF needs p in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

/// Quantile for `p <= 0.5`.
fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    if p == 0.5 {
        return 0.0;
    }
    x - (normal_cdf(x) - p) / normal_pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bisection on Φ; independent of the rational approximation.
    fn bisect_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn known_quantile() {
        let oracle = bisect_quantile(0.975);
        assert!((oracle - 1.959_964).abs() < 1e-5);
        assert!((inverse_normal_cdf(0.975).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inverse_normal_cdf(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn left_inverse_on_random_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p: f64 = rng.random_range(1e-12..1.0 - 1e-12);
            let z = inverse_normal_cdf(p).unwrap();
            assert!((normal_cdf(z) - p).abs() <= 1e-9, "p={p}");
        }
    }

    #[test]
    fn quantile_error_across_range() {
        let mut ps: Vec<f64> = (1..=12).map(|e| 10f64.powi(-e)).collect();
        ps.extend((1..100).map(|i| i as f64 / 100.0));
        ps.extend((1..=12).map(|e| 1.0 - 10f64.powi(-e)));
        for p in ps {
            let z = inverse_normal_cdf(p).unwrap();
            // upper tail: Φ near 1 cannot resolve 1e-12 steps, so bisect the complement
            let oracle = if p > 0.5 {
                -bisect_quantile(1.0 - p)
            } else {
                bisect_quantile(p)
            };
            assert!((z - oracle).abs() <= 1e-9, "p={p}");
        }
    }

    #[test]
    fn cdf_symmetry_and_tails() {
        for z in [-8.0, -3.0, -0.5, 0.0, 1.0, 6.0] {
            assert!((normal_cdf(z) + normal_cdf(-z) - 1.0).abs() < 1e-15);
        }
        assert!(normal_cdf(-10.0) > 0.0 && normal_cdf(-10.0) < 1e-22);
    }
}
