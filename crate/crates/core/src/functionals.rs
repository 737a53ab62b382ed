use num_complex::Complex64;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::grid::{sphere_area, RadialGrid};
use crate::params::ModelParams;

/// Raw integrals of a field. `g_raw` is G(v) without the coupling constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Components {
    pub mass: f64,
    pub kinetic: f64,
    pub g_raw: f64,
    pub power: f64,
}

/// Every functional of the model evaluated on one field at one frequency.
/// `potential_G` already carries the coupling constant.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub omega: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential_G: f64,
    pub power_Lp: f64,
    pub energy_E: f64,
    pub action_S: f64,
    pub nehari_K: f64,
    pub virial_Q: f64,
    pub quadratic_H: f64,
}

impl FunctionalReport {
    pub fn assemble(c: &Components, p: &ModelParams, omega: f64) -> Self {
        let a2 = p.alpha() + 2.0;
        let g = p.coupling() * c.g_raw;
        let energy = c.kinetic / 2.0 - g / 2.0 - c.power / a2;
        FunctionalReport {
            omega,
            mass: c.mass,
            kinetic: c.kinetic,
            potential_G: g,
            power_Lp: c.power,
            energy_E: energy,
            action_S: energy + omega * c.mass / 2.0,
            nehari_K: c.kinetic - g + omega * c.mass - c.power,
            virial_Q: c.kinetic - p.sigma() / 2.0 * g - p.beta() / a2 * c.power,
            quadratic_H: c.kinetic - g + omega * c.mass,
        }
    }

    /// Largest absolute constituent, used to normalise residuals.
    pub fn scale(&self) -> f64 {
        self.kinetic
            .abs()
            .max(self.potential_G.abs())
            .max(self.power_Lp.abs())
            .max((self.omega * self.mass).abs())
    }
}

fn check_dim(v: &RadialField, p: &ModelParams) -> Result<()> {
    if v.grid.d != p.d() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but model dimension {}",
            v.grid.d,
            p.d()
        )));
    }
    Ok(())
}

pub fn mass(v: &RadialField) -> f64 {
    v.values.iter().zip(&v.grid.w).map(|(z, w)| w * z.norm_sqr()).sum()
}

/// Discrete Dirichlet energy sum_f A_f |v_f - v_{f-1}|^2 / h with a zero
/// ghost value past r_max and no flux through the origin.
pub fn kinetic(v: &RadialField) -> f64 {
    kinetic_slice(&v.grid, &v.values)
}

pub(crate) fn kinetic_slice(g: &RadialGrid, v: &[Complex64]) -> f64 {
    let n = g.n;
    let mut s = 0.0;
    for f in 1..=n {
        let right = if f == n { Complex64::new(0.0, 0.0) } else { v[f] };
        s += g.face_area[f] * (right - v[f - 1]).norm_sqr();
    }
    s / g.h
}

pub(crate) fn kinetic_real(g: &RadialGrid, v: &[f64]) -> f64 {
    let n = g.n;
    let mut s = 0.0;
    for f in 1..=n {
        let right = if f == n { 0.0 } else { v[f] };
        let dv = right - v[f - 1];
        s += g.face_area[f] * dv * dv;
    }
    s / g.h
}

/// G(v) = ∫ |x|^{-σ} |v|^2 dx without the coupling constant.
pub fn potential_g(v: &RadialField, sigma: f64) -> f64 {
    let pw = v.grid.potential_weights(sigma);
    v.values.iter().zip(&pw).map(|(z, g)| g * z.norm_sqr()).sum()
}

pub fn power_lp(v: &RadialField, q: f64) -> f64 {
    v.values
        .iter()
        .zip(&v.grid.w)
        .map(|(z, w)| w * z.norm().powf(q))
        .sum()
}

pub fn components(v: &RadialField, p: &ModelParams) -> Result<Components> {
    check_dim(v, p)?;
    Ok(Components {
        mass: mass(v),
        kinetic: kinetic(v),
        g_raw: potential_g(v, p.sigma()),
        power: power_lp(v, p.alpha() + 2.0),
    })
}

/// Components of a real profile, with the potential weights supplied by the caller.
pub(crate) fn components_real(g: &RadialGrid, pw: &[f64], alpha: f64, v: &[f64]) -> Components {
    let mut m = 0.0;
    let mut gr = 0.0;
    let mut pp = 0.0;
    for i in 0..g.n {
        let a = v[i] * v[i];
        m += g.w[i] * a;
        gr += pw[i] * a;
        pp += g.w[i] * v[i].abs().powf(alpha + 2.0);
    }
    Components {
        mass: m,
        kinetic: kinetic_real(g, v),
        g_raw: gr,
        power: pp,
    }
}

pub fn functionals(v: &RadialField, p: &ModelParams, omega: f64) -> Result<FunctionalReport> {
    let c = components(v, p)?;
    Ok(FunctionalReport::assemble(&c, p, omega))
}

pub fn h1_norm(v: &RadialField) -> f64 {
    (mass(v) + kinetic(v)).sqrt()
}

pub fn h1_distance(u: &RadialField, v: &RadialField) -> Result<f64> {
    Ok(h1_norm(&u.sub(v)?))
}

/// Discrete Euler-Lagrange operator of E: -Δv - c|x|^{-σ}v - |v|^α v at each node.
pub fn euler_lagrange(v: &RadialField, p: &ModelParams) -> Result<Vec<Complex64>> {
    check_dim(v, p)?;
    let g = &v.grid;
    let (diag, off) = g.stiffness();
    let pw = g.potential_weights(p.sigma());
    let n = g.n;
    let x = &v.values;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut kv = diag[i] * x[i];
        if i > 0 {
            kv += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            kv += off[i] * x[i + 1];
        }
        let lap = kv / g.w[i];
        let pot = p.coupling() * pw[i] / g.w[i];
        out.push(lap - x[i] * pot - x[i] * x[i].norm().powf(p.alpha()));
    }
    Ok(out)
}

/// Weighted inner product Re sum w a conj(b).
pub fn inner_re(g: &RadialGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(&g.w)
        .map(|((x, y), w)| w * (x * y.conj()).re)
        .sum()
}

/// Weighted L^2 norm of a nodal vector.
pub fn l2_norm(g: &RadialGrid, a: &[Complex64]) -> f64 {
    a.iter().zip(&g.w).map(|(x, w)| w * x.norm_sqr()).sum::<f64>().sqrt()
}

/// G(v) / (kinetic^{σ/2} mass^{(2-σ)/2}); bounded above by a constant for all v.
pub fn hardy_ratio(v: &RadialField, sigma: f64) -> f64 {
    let k = kinetic(v);
    let m = mass(v);
    potential_g(v, sigma) / (k.powf(sigma / 2.0) * m.powf((2.0 - sigma) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DecreasingVerdict {
    Holds,
    Violated,
    NotMonotone,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecreasingBound {
    pub verdict: DecreasingVerdict,
    /// min over nonzero nodes of bound / |v|; infinite for the zero field.
    pub margin: f64,
    pub max_violation: f64,
}

/// Checks |v(r)| <= (d/|S^{d-1}|)^{1/2} r^{-d/2} ||v||_{L^2} for a real,
/// nonnegative, radially nonincreasing profile.
pub fn radial_decreasing_bound_check(v: &RadialField) -> DecreasingBound {
    let vmax = v.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-14 * vmax;
    let real_nonneg = v.values.iter().all(|z| z.im.abs() <= tol && z.re >= -tol);
    let monotone = v.values.windows(2).all(|w| w[1].re <= w[0].re + tol);
    if !(real_nonneg && monotone) {
        return DecreasingBound {
            verdict: DecreasingVerdict::NotMonotone,
            margin: f64::NAN,
            max_violation: f64::NAN,
        };
    }
    let g = &v.grid;
    let d = g.d as f64;
    let c = (d / sphere_area(g.d)).sqrt() * mass(v).sqrt();
    let mut margin = f64::INFINITY;
    let mut worst = 0.0f64;
    for (z, &r) in v.values.iter().zip(&g.r) {
        let a = z.norm();
        if a == 0.0 {
            continue;
        }
        let bound = c * r.powf(-d / 2.0);
        margin = margin.min(bound / a);
        worst = worst.max(a - bound);
    }
    DecreasingBound {
        verdict: if margin >= 1.0 - 1e-12 {
            DecreasingVerdict::Holds
        } else {
            DecreasingVerdict::Violated
        },
        margin,
        max_violation: worst,
    }
}

/// Fraction of the mass of v that v^λ would push past r_max.
pub fn escaping_mass_fraction(v: &RadialField, lam: f64) -> f64 {
    if lam >= 1.0 {
        return 0.0;
    }
    let g = &v.grid;
    let cut = lam * g.r_max;
    let total = mass(v);
    if total == 0.0 {
        return 0.0;
    }
    let out: f64 = v
        .values
        .iter()
        .zip(&g.r)
        .zip(&g.w)
        .filter(|((_, &r), _)| r + 0.5 * g.h > cut)
        .map(|((z, _), w)| w * z.norm_sqr())
        .sum();
    out / total
}

/// v^λ(x) = λ^{d/2} v(λx) on the same grid.
pub fn rescale(v: &RadialField, lam: f64) -> Result<RadialField> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(param("lam", format!("need lam > 0, got {lam}")));
    }
    if lam == 1.0 {
        return Ok(v.clone());
    }
    let lost = escaping_mass_fraction(v, lam);
    if lost > 1e-8 {
        log::warn!("rescale by {lam}: {lost:.3e} of the mass leaves the grid");
    }
    let amp = lam.powf(v.grid.d as f64 / 2.0);
    let out = v.resample(v.grid.clone(), |r| lam * r);
    Ok(out.scaled(amp))
}
