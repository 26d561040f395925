//! Mappings from smoothed occupancy `f̂` to a soft hard-occupancy `G` and to rendering density.
//!
//! `G = sigmoid(α (f̂ − 1/2))` and `density = scale · (−ln(1 + ε − G))`, clamped at zero
//! since the raw formula dips slightly negative for `G < ε`.

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 19.0;
pub const DEFAULT_DENSITY_SCALE: f64 = 30.0;
pub const DEFAULT_EPS_D: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    /// Sigmoid eccentricity.
    pub alpha: f64,
    pub density_scale: f64,
    /// Offset inside the logarithm; bounds the density at `−scale · ln(eps_d)`.
    pub eps_d: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            alpha: DEFAULT_ALPHA,
            density_scale: DEFAULT_DENSITY_SCALE,
            eps_d: DEFAULT_EPS_D,
        }
    }
}

impl TransferConfig {
    pub fn new(alpha: f64, density_scale: f64, eps_d: f64) -> Result<Self> {
        let cfg = TransferConfig {
            alpha,
            density_scale,
            eps_d,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.density_scale.is_finite() && self.density_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "density scale must be positive, got {}",
                self.density_scale
            )));
        }
        if !(self.eps_d > 0.0 && self.eps_d < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_d must lie in (0, 1), got {}",
                self.eps_d
            )));
        }
        Ok(())
    }

    /// Upper bound of [`density`], reached as `G → 1`.
    pub fn max_density(&self) -> f64 {
        -self.density_scale * self.eps_d.ln()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `G(f̂) = sigmoid(α (f̂ − 1/2))`.
#[inline]
pub fn occupancy_soft(fhat: f64, cfg: &TransferConfig) -> f64 {
    sigmoid(cfg.alpha * (fhat - 0.5))
}

/// Raw density before the nonnegativity clamp; may be slightly negative.
#[inline]
pub fn density_unclamped(fhat: f64, cfg: &TransferConfig) -> f64 {
    let g = occupancy_soft(fhat, cfg);
    -cfg.density_scale * (1.0 + cfg.eps_d - g).ln()
}

/// Rendering density, `max(0, −scale · ln(1 + ε − G))`.
#[inline]
pub fn density(fhat: f64, cfg: &TransferConfig) -> f64 {
    density_unclamped(fhat, cfg).max(0.0)
}

/// Derivatives `(dG/df̂, d density/df̂)`; the density derivative is 0 where the clamp is active.
#[inline]
pub fn transfer_grad(fhat: f64, cfg: &TransferConfig) -> (f64, f64) {
    let g = occupancy_soft(fhat, cfg);
    let dg = cfg.alpha * g * (1.0 - g);
    let denom = 1.0 + cfg.eps_d - g;
    let dd = if g < cfg.eps_d {
        0.0
    } else {
        cfg.density_scale * dg / denom
    };
    (dg, dd)
}

/// Density and its derivative in one evaluation.
#[inline]
pub fn density_and_grad(fhat: f64, cfg: &TransferConfig) -> (f64, f64) {
    let g = occupancy_soft(fhat, cfg);
    if g < cfg.eps_d {
        return (0.0, 0.0);
    }
    let denom = 1.0 + cfg.eps_d - g;
    let dg = cfg.alpha * g * (1.0 - g);
    (
        (-cfg.density_scale * denom.ln()).max(0.0),
        cfg.density_scale * dg / denom,
    )
}
