use std::sync::Arc;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::{components, Components};
use crate::grid::RadialGrid;
use crate::linalg::{count_below, sym_matvec, Tridiag};
use crate::params::ModelParams;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub mu1: f64,
    /// Positive, unit L^2 norm.
    pub phi: RadialField,
    /// ||A Φ - μ Φ|| / (|μ| ||Φ||) in the weighted norm.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 20_000;
const VEC_TOL: f64 = 1e-10;

/// Symmetrised operator W^{-1/2}(K - c diag g)W^{-1/2} as (diag, off).
pub(crate) fn symmetric_operator(p: &ModelParams, g: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let (kd, ko) = g.stiffness();
    let pw = g.potential_weights(p.sigma());
    let c = p.coupling();
    let diag = (0..g.n).map(|i| (kd[i] - c * pw[i]) / g.w[i]).collect();
    let off = (0..g.n - 1)
        .map(|i| ko[i] / (g.w[i] * g.w[i + 1]).sqrt())
        .collect();
    (diag, off)
}

fn rayleigh(diag: &[f64], off: &[f64], x: &[f64]) -> f64 {
    let ax = sym_matvec(diag, off, x);
    let num: f64 = ax.iter().zip(x).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    num / den
}

fn normalize(x: &mut [f64]) {
    let s = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for a in x.iter_mut() {
        *a *= sign / s;
    }
}

/// Bottom of the spectrum of -Δ - c|x|^{-σ} on the grid by shifted inverse
/// iteration. μ₁ is first bracketed by inertia counts and bisected, so the
/// shift sits just below μ₁ whatever the scale of the grid.
pub fn ground_eigenpair(p: &ModelParams, g: Arc<RadialGrid>) -> Result<EigenPair> {
    if g.d != p.d() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but model dimension {}",
            g.d,
            p.d()
        )));
    }
    let (diag, off) = symmetric_operator(p, &g);
    let n = g.n;
    // Trial vector: a decaying exponential in the symmetrised variables.
    let width = (g.r_max / 8.0).max(1.0);
    let mut x: Vec<f64> = (0..n)
        .map(|i| (-g.r[i] / width).exp() * g.w[i].sqrt())
        .collect();
    normalize(&mut x);
    let rq = rayleigh(&diag, &off, &x);
    let mut hi = rq + 1e-12 * rq.abs().max(1.0);
    let mut step = 0.5 * rq.abs().max(1.0);
    let mut lo = rq - step;
    while count_below(&diag, &off, lo) > 0 {
        hi = lo;
        step *= 2.0;
        lo -= step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.abs().max(lo.abs()).max(1e-300) || mid <= lo || mid >= hi {
            break;
        }
        if count_below(&diag, &off, mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let shift = lo - 1e-10 * lo.abs().max(1e-3 * step);
    let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let lu = Tridiag::factor(&off, &shifted, &off)
        .ok_or_else(|| Error::Convergence {
            what: "ground_eigenpair",
            detail: "singular shifted operator".into(),
        })?;
    let mut change = f64::INFINITY;
    let mut it = 0;
    while it < MAX_ITER {
        it += 1;
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        normalize(&mut y);
        change = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = y;
        if change < VEC_TOL {
            break;
        }
    }
    if change >= VEC_TOL {
        return Err(Error::IterationLimit {
            what: "ground_eigenpair",
            iterations: it,
            residual: change,
        });
    }
    let mu1 = rayleigh(&diag, &off, &x);
    let ax = sym_matvec(&diag, &off, &x);
    let res = ax
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - mu1 * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let phi_vals: Vec<f64> = x.iter().zip(&g.w).map(|(a, w)| a / w.sqrt()).collect();
    let phi = RadialField::from_real(g, &phi_vals)?;
    Ok(EigenPair {
        mu1,
        phi,
        residual: res / mu1.abs().max(f64::MIN_POSITIVE),
        iterations: it,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundVerdict {
    pub holds: bool,
    /// μ₁ ||v||^2
    pub lhs: f64,
    /// ||∇v||^2 - c G(v)
    pub rhs: f64,
    pub tol: f64,
}

/// μ₁ ||v||^2 <= ||∇v||^2 - c G(v), with tolerance 1e-8 (1 + |kinetic|).
pub fn eigenvalue_bound_check(v: &RadialField, pair: &EigenPair, p: &ModelParams) -> Result<BoundVerdict> {
    if v.is_zero() {
        return Err(param("v", "eigenvalue bound needs a nonzero field"));
    }
    let c: Components = components(v, p)?;
    let lhs = pair.mu1 * c.mass;
    let rhs = c.kinetic - p.coupling() * c.g_raw;
    let tol = 1e-8 * (1.0 + c.kinetic.abs());
    Ok(BoundVerdict {
        holds: lhs <= rhs + tol,
        lhs,
        rhs,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn free_laplacian_is_nonnegative() {
        let p = ModelParams::new(3, 1.0, 1.0).unwrap().with_coupling(0.0).unwrap();
        let g = Arc::new(build_grid(3, 20.0, 512).unwrap());
        let e = ground_eigenpair(&p, g).unwrap();
        assert!(e.mu1 >= -1e-6);
        // Dirichlet ball: μ₁ = (π / R)^2 up to the half-cell ghost offset.
        assert!((e.mu1 - (std::f64::consts::PI / 20.0).powi(2)).abs() < 1e-3);
    }

    #[test]
    fn eigenvector_positive_and_normalised() {
        let p = ModelParams::new(2, 0.5, 1.0).unwrap();
        let g = Arc::new(build_grid(2, 40.0, 2048).unwrap());
        let e = ground_eigenpair(&p, g).unwrap();
        assert!(e.mu1 < 0.0);
        assert!(e.phi.values.iter().all(|z| z.re > 0.0));
        let m = crate::functionals::mass(&e.phi);
        assert!((m - 1.0).abs() < 1e-10);
        assert!(e.residual < 1e-8);
    }
}
