//! Checker for the Shioji–Watanabe conditions that guarantee a unique
//! positive radial solution of
//!   φ'' + (d-1)/r φ' + (c r^{-σ} - ω) φ + φ^{α+1} = 0,
//! i.e. f = r^{d-1}, g = c r^{-σ} - ω, h = 1, p = α + 1.

use serde::Serialize;

use crate::elliptic::{find_ground_state_shooting_with, Resolution, ShootingOptions};
use crate::error::{param, Result};
use crate::functionals::h1_distance;
use crate::params::ModelParams;

/// G(r) = (A r² + B r^{2-σ} + C) r^{power}.
#[derive(Debug, Clone, Copy, Serialize)]
#[allow(non_snake_case)]
pub struct SWCoefficients {
    pub A: f64,
    pub B: f64,
    pub C: f64,
    pub power: f64,
}

/// Exponent of a(r) = r^k.
fn a_exponent(d: f64, al: f64) -> f64 {
    2.0 * (d - 1.0) * (al + 2.0) / (al + 4.0)
}

fn regime_guard(p: &ModelParams, omega: f64) -> Result<()> {
    let d = p.d();
    if d < 3 {
        return Err(param("d", format!("the checker needs d >= 3, got {d}")));
    }
    if !(p.sigma() > 0.0 && p.sigma() < 1.0) {
        return Err(param("sigma", format!("the checker needs 0 < sigma < 1, got {}", p.sigma())));
    }
    let al = p.alpha();
    if !(al > 0.0 && al < 4.0 / (d as f64 - 2.0)) {
        return Err(param("alpha", format!("the checker needs 0 < alpha < 4/(d-2), got {al}")));
    }
    if !omega.is_finite() {
        return Err(param("omega", "must be finite"));
    }
    Ok(())
}

pub fn sw_coefficients(p: &ModelParams, omega: f64) -> Result<SWCoefficients> {
    regime_guard(p, omega)?;
    Ok(sw_coefficients_unchecked(p.d(), p.sigma(), p.alpha(), omega, p.coupling()))
}

fn sw_coefficients_unchecked(d: usize, sigma: f64, al: f64, omega: f64, c: f64) -> SWCoefficients {
    let d = d as f64;
    let q = al + 4.0;
    SWCoefficients {
        A: -omega * al * (d - 1.0) / q,
        B: c * ((2.0 * d - 2.0 - sigma) * al - 4.0 * sigma) / (2.0 * q),
        C: (d - 1.0) * (4.0 - (d - 2.0) * al) * (2.0 * (d - 2.0) * al + 4.0 * (d - 3.0)) / (q * q * q),
        power: ((2.0 * d - 3.0) * al + 4.0 * (d - 2.0)) / q - 2.0,
    }
}

pub fn sw_g(r: f64, k: &SWCoefficients, sigma: f64) -> f64 {
    (k.A * r * r + k.B * r.powf(2.0 - sigma) + k.C) * r.powf(k.power)
}

/// Bracket of the factor A r² + B r^{2-σ} + C.
fn factor(r: f64, k: &SWCoefficients, sigma: f64) -> f64 {
    k.A * r * r + k.B * r.powf(2.0 - sigma) + k.C
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub label: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub coefficients: SWCoefficients,
    pub conditions: Vec<Condition>,
    /// The unique sign change of G, when there is exactly one.
    pub r1: Option<f64>,
    /// All sign changes found by the scan.
    pub sign_changes: Vec<f64>,
    pub all_hold: bool,
}

const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e6;
const SCAN_NODES: usize = 100_000;

/// Sign changes of `f` on a log grid over [1e-6, 1e6], each refined by
/// bisection.
fn sign_changes(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let ratio = (SCAN_HI / SCAN_LO).ln();
    let node = |k: usize| SCAN_LO * (ratio * k as f64 / (SCAN_NODES - 1) as f64).exp();
    let mut out = Vec::new();
    let mut prev = f(node(0));
    for k in 1..SCAN_NODES {
        let x = node(k);
        let v = f(x);
        if v == 0.0 || (prev != 0.0 && v.signum() != prev.signum()) {
            let (mut lo, mut hi) = (node(k - 1), x);
            let s_lo = prev.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = v;
    }
    out
}

pub fn check_conditions(p: &ModelParams, omega: f64) -> Result<UniquenessReport> {
    let k = sw_coefficients(p, omega)?;
    let d = p.d() as f64;
    let s = p.sigma();
    let al = p.alpha();
    let ka = a_exponent(d, al);
    let kb = ka - 1.0;
    let kc = ka - 2.0;
    let b0 = 2.0 * (d - 1.0) / (al + 4.0);
    let c0 = 2.0 * (d - 1.0) * (4.0 - (d - 2.0) * al) / ((al + 4.0) * (al + 4.0));
    let mut conditions = Vec::with_capacity(6);

    // g = c r^{-σ} - ω is smooth on (0, ∞) and h ≡ 1.
    conditions.push(Condition {
        label: "I",
        holds: true,
        detail: "g is a power of r plus a constant; h = 1 > 0".into(),
    });
    // r^{1-d} ∫_0^r τ^{d-1-σ} dτ ~ r^{1-σ}/(d-σ).
    conditions.push(Condition {
        label: "II",
        holds: s < d && 1.0 - s > 0.0,
        detail: format!("behaves like r^{:.6}", 1.0 - s),
    });
    // (i) r^{d-1-σ} ∈ L¹ near 0; (ii) r^{d-1-σ} r^{2-d} = r^{1-σ} ∈ L¹ near 0.
    conditions.push(Condition {
        label: "III",
        holds: d - 1.0 - s > -1.0 && 1.0 - s > -1.0 && d != 2.0,
        detail: format!("exponents {:.6} and {:.6} exceed -1", d - 1.0 - s, 1.0 - s),
    });
    // a = r^{ka}, b = b0 r^{kb}, c = c0 r^{kc}; a g ~ r^{ka-σ}.
    // lim c ∈ [0, ∞] needs only c0 ≥ 0, whatever the sign of kc.
    let iv = ka > 0.0 && kb >= 0.0 && c0 >= 0.0 && ka - s > 0.0;
    conditions.push(Condition {
        label: "IV",
        holds: iv,
        detail: format!("a ~ r^{ka:.6}, b ~ {b0:.6} r^{kb:.6}, c ~ {c0:.6} r^{kc:.6}, a g ~ r^{:.6}", ka - s),
    });
    let changes = sign_changes(|r| factor(r, &k, s));
    let first_positive = factor(SCAN_LO, &k, s) > 0.0;
    let last_negative = factor(SCAN_HI, &k, s) < 0.0;
    let r1 = (changes.len() == 1 && first_positive && last_negative).then(|| changes[0]);
    conditions.push(Condition {
        label: "V",
        holds: r1.is_some(),
        detail: format!("{} sign change(s) of G on [{SCAN_LO:e}, {SCAN_HI:e}]", changes.len()),
    });
    conditions.push(Condition {
        label: "VI",
        holds: last_negative,
        detail: format!("G({SCAN_HI:e}) = {:.6e}", sw_g(SCAN_HI, &k, s)),
    });
    let all_hold = conditions.iter().all(|c| c.holds);
    Ok(UniquenessReport {
        coefficients: k,
        conditions,
        r1,
        sign_changes: changes,
        all_hold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Corroboration {
    pub phi0: (f64, f64),
    pub h1_distance: f64,
}

/// Shoots twice from two different initial scan ranges for φ(0) and measures the
/// H¹ distance between the two profiles.
pub fn two_seed_corroboration(p: &ModelParams, omega: f64, res: &Resolution) -> Result<Corroboration> {
    let first = ShootingOptions {
        scan_lo: 1e-3,
        scan_hi: 1e3,
        points_per_decade: 10,
    };
    let second = ShootingOptions {
        scan_lo: 0.037,
        scan_hi: 370.0,
        points_per_decade: 7,
    };
    let a = find_ground_state_shooting_with(p, omega, res, &first)?;
    let b = find_ground_state_shooting_with(p, omega, res, &second)?;
    Ok(Corroboration {
        phi0: (a.phi.values[0].re, b.phi.values[0].re),
        h1_distance: h1_distance(&a.phi, &b.phi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_at_reference_point() {
        // d = 3, σ = 1/2, α = 1, ω = 1, c = 1 by hand:
        // A = -2/5, B = (7/2 - 2)/10 = 3/20, C = 2·3·2/125 = 12/125,
        // power = (3 + 4)/5 - 2 = -3/5.
        let k = sw_coefficients_unchecked(3, 0.5, 1.0, 1.0, 1.0);
        assert!((k.A + 0.4).abs() < 1e-15);
        assert!((k.B - 0.15).abs() < 1e-15);
        assert!((k.C - 12.0 / 125.0).abs() < 1e-15);
        assert!((k.power + 0.6).abs() < 1e-15);
    }

    #[test]
    fn c_vanishes_at_energy_critical_power() {
        let k = sw_coefficients_unchecked(3, 0.5, 4.0, 1.0, 1.0);
        assert!(k.C.abs() < 1e-15);
    }

    #[test]
    fn scan_finds_simple_roots() {
        let roots = sign_changes(|r| (r - 2.0) * (r - 50.0));
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 2.0).abs() < 1e-12 && (roots[1] - 50.0).abs() < 1e-10);
    }
}
