use serde::Serialize;

use crate::error::{param, Result};

/// Model constants for i u_t + Δu + c|x|^{-σ}u + |u|^α u = 0 in dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    d: usize,
    sigma: f64,
    alpha: f64,
    coupling: f64,
}

impl ModelParams {
    /// Validated parameters with coupling 1.
    pub fn new(d: usize, sigma: f64, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(param("d", "dimension must be at least 1"));
        }
        let smax = (d as f64).min(2.0);
        if !(sigma > 0.0 && sigma < smax) {
            return Err(param("sigma", format!("need 0 < sigma < {smax}, got {sigma}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(param("alpha", format!("need alpha > 0, got {alpha}")));
        }
        if d >= 3 {
            let ec = 4.0 / (d as f64 - 2.0);
            if alpha >= ec {
                return Err(param(
                    "alpha",
                    format!("energy-critical or supercritical power: need alpha < {ec}, got {alpha}"),
                ));
            }
        }
        Ok(ModelParams {
            d,
            sigma,
            alpha,
            coupling: 1.0,
        })
    }

    /// Mass-critical power α = 4/d.
    pub fn mass_critical(d: usize, sigma: f64) -> Result<Self> {
        Self::new(d, sigma, 4.0 / d as f64)
    }

    pub fn with_coupling(mut self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(param("coupling", format!("need coupling >= 0, got {c}")));
        }
        self.coupling = c;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn beta(&self) -> f64 {
        self.d as f64 * self.alpha / 2.0
    }

    /// +1 above the mass-critical power, 0 at it, -1 below (within 1e-12).
    pub fn mass_regime(&self) -> i32 {
        let crit = 4.0 / self.d as f64;
        if (self.alpha - crit).abs() <= 1e-12 * crit {
            0
        } else if self.alpha > crit {
            1
        } else {
            -1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sigma_and_alpha() {
        assert!(ModelParams::new(3, 2.5, 1.0).is_err());
        assert!(ModelParams::new(1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.5, 4.0).is_err());
        assert!(ModelParams::new(3, 0.5, 0.0).is_err());
        assert!(ModelParams::new(2, 1.5, 40.0).is_ok());
        assert!(ModelParams::new(3, 0.5, 1.0).unwrap().with_coupling(-1.0).is_err());
    }

    #[test]
    fn beta_tracks_d_and_alpha() {
        let p = ModelParams::new(3, 0.5, 2.0).unwrap();
        assert_eq!(p.beta(), 3.0);
        assert_eq!(p.mass_regime(), 1);
        assert_eq!(ModelParams::mass_critical(2, 0.5).unwrap().mass_regime(), 0);
    }
}
