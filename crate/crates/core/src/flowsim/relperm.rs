//! Brooks-Corey relative permeability and Leverett J-function capillary
//! pressure.

use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

/// Brooks-Corey coefficients (CO2-brine defaults from Mt. Simon sandstone data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelPermConfig {
    /// Irreducible water saturation.
    pub swi: f64,
    /// Residual gas saturation.
    pub sgr: f64,
    /// Water Corey exponent.
    pub nw: f64,
    /// Gas Corey exponent.
    pub ng: f64,
    /// Gas relative permeability at irreducible water saturation.
    pub krg_at_swi: f64,
    /// Capillary pressure exponent.
    pub lambda: f64,
}

impl Default for RelPermConfig {
    fn default() -> Self {
        RelPermConfig { swi: 0.22, sgr: 0.0, nw: 9.0, ng: 4.0, krg_at_swi: 0.95, lambda: 0.55 }
    }
}

impl RelPermConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swi < 0.0 || self.sgr < 0.0 || self.swi + self.sgr >= 1.0 {
            return Err(GhmError::Config("invalid saturation endpoints".into()));
        }
        if self.nw < 1.0 || self.ng < 1.0 {
            return Err(GhmError::Config("Corey exponents must be >= 1".into()));
        }
        if !(self.krg_at_swi > 0.0 && self.krg_at_swi <= 1.0) {
            return Err(GhmError::Config("krg at swi must be in (0, 1]".into()));
        }
        if self.lambda <= 0.0 {
            return Err(GhmError::Config("capillary exponent must be > 0".into()));
        }
        Ok(())
    }

    /// Maximum gas saturation, `1 - swi`.
    pub fn sg_max(&self) -> f64 {
        1.0 - self.swi
    }
}

#[inline]
fn pow_fast(x: f64, e: f64) -> f64 {
    let n = e as i32;
    if n as f64 == e && (0..=16).contains(&n) {
        x.powi(n)
    } else {
        x.powf(e)
    }
}

/// Relative permeabilities `(krw, krg)` at water saturation `sw`.
///
/// Effective saturation is clamped, so any `sw in [0, 1]` is accepted.
#[inline]
pub fn brooks_corey(sw: f64, cfg: &RelPermConfig) -> (f64, f64) {
    let se = ((sw - cfg.swi) / (1.0 - cfg.swi - cfg.sgr)).clamp(0.0, 1.0);
    let krw = pow_fast(se, cfg.nw);
    let krg = cfg.krg_at_swi * pow_fast(1.0 - se, cfg.ng);
    (krw, krg)
}

/// Leverett J-function capillary pressure in Pa:
/// `Pc = c_ref * sqrt(phi / k) * Se^(-1/lambda)`, capped at `pc_max`.
///
/// `k` in m^2; `c_ref` in Pa*m.
pub fn leverett_pc(sw: f64, phi: f64, k: f64, cfg: &RelPermConfig, c_ref: f64, pc_max: f64) -> Result<f64> {
    if phi <= 0.0 || k <= 0.0 {
        return Err(GhmError::Config("leverett_pc needs positive phi and k".into()));
    }
    let se = ((sw - cfg.swi) / (1.0 - cfg.swi - cfg.sgr)).clamp(0.0, 1.0);
    let anchor = c_ref * (phi / k).sqrt();
    if se <= 0.0 {
        return Ok(pc_max);
    }
    Ok((anchor * se.powf(-1.0 / cfg.lambda)).min(pc_max))
}
