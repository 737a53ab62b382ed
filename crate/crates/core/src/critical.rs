//! Mass-critical asymptotics: β_a, λ₀, the sharp Gagliardo–Nirenberg
//! inequality, trial energies with a cut-off soliton, the I(a) sweep towards
//! a*, scaling bounds and rescaled convergence of the minimisers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{minimize_energy_constrained, normalized_flow, FlowOptions, FreeSoliton, Resolution};
use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::{functionals, h1_distance, kinetic, mass, potential_g, power_lp};
use crate::grid::{build_grid, RadialGrid};
use crate::params::ModelParams;

/// Sweep masses as fractions of a*.
pub const SWEEP_FRACTIONS: [f64; 8] = [0.8, 0.9, 0.95, 0.975, 0.99, 0.995, 0.9975, 0.999];

/// Rescaled profiles must span at least this many nodes across their
/// half-width.
const MIN_HALF_WIDTH_NODES: f64 = 32.0;

/// β_a = 1 - (a/a*)^{2/d}.
pub fn beta_a(a: f64, a_star: f64, d: usize) -> f64 {
    1.0 - (a / a_star).powf(2.0 / d as f64)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Lambda0 {
    pub lambda0: f64,
    /// G(Q₀) with Q₀ = Q/||Q||.
    pub g_q0: f64,
    /// Derivative of λ ↦ λ²d/4 - λ^σ G(Q₀)/2 at λ₀.
    pub stationarity: f64,
    /// λ₀²d/4 - λ₀^σ G(Q₀)/2, the limit of β_a^{σ/(2-σ)} I(a)/a.
    pub limit_value: f64,
}

/// λ₀ = (σ G(Q₀)/d)^{1/(2-σ)}, the minimiser of λ²d/4 - λ^σ G(Q₀)/2.
pub fn lambda0(q: &RadialField, sigma: f64, d: usize) -> Result<Lambda0> {
    if q.grid.d != d {
        return Err(Error::GridMismatch(format!("soliton lives in d = {}, asked for d = {d}", q.grid.d)));
    }
    if !(sigma > 0.0 && sigma < 2.0f64.min(d as f64)) {
        return Err(param("sigma", format!("need 0 < sigma < min(2, d), got {sigma}")));
    }
    let g_q0 = potential_g(q, sigma) / mass(q);
    Ok(lambda0_from_g(g_q0, sigma, d))
}

pub fn lambda0_from_g(g_q0: f64, sigma: f64, d: usize) -> Lambda0 {
    let df = d as f64;
    let l = (sigma * g_q0 / df).powf(1.0 / (2.0 - sigma));
    Lambda0 {
        lambda0: l,
        g_q0,
        stationarity: l * df / 2.0 - sigma / 2.0 * l.powf(sigma - 1.0) * g_q0,
        limit_value: l * l * df / 4.0 - l.powf(sigma) * g_q0 / 2.0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GnReport {
    /// |lhs - rhs| / rhs at v = Q.
    pub equality_at_q: f64,
    /// min over the family of (rhs - lhs) / rhs.
    pub min_relative_gap: f64,
    pub strict_on_family: bool,
    pub family_size: usize,
}

/// (lhs, rhs) of ||v||^{4/d+2}_{4/d+2} ≤ (d+2)/d (||v||/||Q||)^{4/d} ||∇v||².
pub fn gn_sides(v: &RadialField, a_star: f64) -> (f64, f64) {
    let df = v.grid.d as f64;
    let lhs = power_lp(v, 4.0 / df + 2.0);
    let rhs = (df + 2.0) / df * (mass(v) / a_star).powf(2.0 / df) * kinetic(v);
    (lhs, rhs)
}

/// Equality at Q and strict inequality, beyond 1e-8 relative, on a
/// deterministic family of Gaussian-type fields.
pub fn gn_sharpness_check(q: &RadialField, family: &[RadialField]) -> GnReport {
    let a_star = mass(q);
    let (l, r) = gn_sides(q, a_star);
    let gaps: Vec<f64> = family
        .iter()
        .map(|v| {
            let (l, r) = gn_sides(v, a_star);
            (r - l) / r
        })
        .collect();
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    GnReport {
        equality_at_q: (l - r).abs() / r,
        min_relative_gap: min_gap,
        strict_on_family: min_gap > 1e-8,
        family_size: family.len(),
    }
}

/// Fifty smooth radial test fields: Gaussians, Gaussians times polynomials,
/// sech-type and algebraically decaying bumps of varying width.
pub fn gn_test_family(g: &Arc<RadialGrid>) -> Result<Vec<RadialField>> {
    let mut out = Vec::with_capacity(50);
    for k in 0..50 {
        let s = 0.4 * 1.06f64.powi(k);
        let kind = k % 5;
        let f = move |r: f64| -> f64 {
            let x = r / s;
            match kind {
                0 => (-x * x / 2.0).exp(),
                1 => (1.0 + 0.5 * x * x) * (-x * x / 2.0).exp(),
                2 => 1.0 / x.cosh(),
                3 => (1.0 + x * x).powf(-2.0) * (-x / 4.0).exp(),
                _ => (-(x.powi(4)) / 4.0).exp(),
            }
        };
        out.push(RadialField::from_real_fn(g.clone(), f)?.scaled(0.5 + 0.03 * k as f64));
    }
    Ok(out)
}

/// Quintic smoothstep cut-off: 1 on r ≤ 1, 0 on r ≥ 2, C² in between.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Radius at which a positive decreasing profile falls to half its maximum.
fn half_width(v: &RadialField) -> f64 {
    let re = v.re();
    let top = re[0];
    let k = re.iter().position(|&x| x < top / 2.0).unwrap_or(re.len() - 1);
    v.grid.r[k]
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialEnergy {
    pub tau: f64,
    /// E(v_τ)/a.
    pub energy_per_mass: f64,
    /// (τ²d/4)β_a - (τ^σ/2)G(Q₀).
    pub expansion: f64,
    pub mass: f64,
}

/// E(v_τ)/a for v_τ = A_τ τ^{d/2} ϕ(x) Q₀(τx), A_τ fixing the mass to a.
/// `grid` must cover the support |x| ≤ 2.
pub fn trial_energy(a: f64, tau: f64, q: &RadialField, p: &ModelParams, grid: &Arc<RadialGrid>) -> Result<TrialEnergy> {
    let d = p.d();
    if (p.alpha() - 4.0 / d as f64).abs() > 1e-12 {
        return Err(param("alpha", "trial energies are for the mass-critical power 4/d"));
    }
    if tau < 1.0 {
        return Err(param("tau", format!("need tau >= 1, got {tau}")));
    }
    if grid.r_max < 2.0 {
        return Err(param("grid", "trial grid must cover |x| <= 2"));
    }
    if half_width(q) / tau < MIN_HALF_WIDTH_NODES * grid.h {
        return Err(Error::Resolution(format!(
            "Q(tau x) with tau = {tau} is narrower than {MIN_HALF_WIDTH_NODES} nodes"
        )));
    }
    let a_star = mass(q);
    let shape = RadialField::from_fn(grid.clone(), |r| q.sample(tau * r) * cutoff(r))?;
    let v = shape.scaled((a / mass(&shape)).sqrt());
    let r = functionals(&v, p, 0.0)?;
    let g_q0 = potential_g(q, p.sigma()) / a_star;
    let df = d as f64;
    Ok(TrialEnergy {
        tau,
        energy_per_mass: r.energy_E / a,
        expansion: tau * tau * df / 4.0 * beta_a(a, a_star, d) - tau.powf(p.sigma()) / 2.0 * g_q0,
        mass: r.mass,
    })
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct CriticalSweepRecord {
    pub a: f64,
    pub beta_a: f64,
    pub I_a: f64,
    pub G_va: f64,
    pub kinetic_va: f64,
    pub h1_error: f64,
    pub gradnorm: f64,
    pub lagrange_omega: f64,
    pub flow_steps: usize,
    pub el_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSweep {
    pub d: usize,
    pub sigma: f64,
    pub a_star: f64,
    pub lambda0: Lambda0,
    pub records: Vec<CriticalSweepRecord>,
    /// Least-squares slope and intercept of log(-I(a)/a) against log β_a.
    pub slope: f64,
    pub intercept: f64,
    pub expected_slope: f64,
    /// Envelope of β_a^{σ/(2-σ)} I(a)/a over the sweep: (-M, -m).
    pub envelope: (f64, f64),
    /// β_a^{σ/(2-σ)} I(a)/a at the mass closest to a*.
    pub limit_estimate: f64,
    /// Least-squares slope of log ||∇v_a|| against log β_a.
    pub gradient_slope: f64,
    /// v_a at the mass closest to a*.
    #[serde(skip)]
    pub closest_minimiser: Option<RadialField>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Nodes on every a-adapted grid.
    pub n: usize,
    /// Grid extent in units of the predicted width β_a^{1/(2-σ)}/λ₀.
    pub extent: f64,
    pub max_steps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n: 1 << 16,
            extent: 40.0,
            max_steps: 100_000,
        }
    }
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Computes the constrained minimiser for every mass in `a_list` on a grid
/// scaled to its predicted concentration width and fits the scaling laws.
pub fn energy_scaling_sweep(p: &ModelParams, a_list: &[f64], soliton: &FreeSoliton, opts: &SweepOptions) -> Result<CriticalSweep> {
    let d = p.d();
    if p.mass_regime() != 0 {
        return Err(param("alpha", "the sweep needs the mass-critical power 4/d"));
    }
    let a_star = soliton.a_star;
    if a_list.len() < 2 {
        return Err(param("a_list", "need at least two masses"));
    }
    if let Some(&a) = a_list.iter().find(|&&a| !(a > 0.0 && a < a_star)) {
        return Err(param("a_list", format!("mass {a} is outside (0, a* = {a_star})")));
    }
    let l0 = lambda0(&soliton.q, p.sigma(), d)?;
    let s = p.sigma();
    let points: Vec<Result<(CriticalSweepRecord, RadialField)>> = a_list
        .par_iter()
        .map(|&a| sweep_point(p, a, soliton, &l0, opts))
        .collect();
    let points: Vec<(CriticalSweepRecord, RadialField)> = points.into_iter().collect::<Result<_>>()?;
    let (records, mut minimisers): (Vec<CriticalSweepRecord>, Vec<RadialField>) = points.into_iter().unzip();
    let lx: Vec<f64> = records.iter().map(|r| r.beta_a.ln()).collect();
    let ly: Vec<f64> = records.iter().map(|r| (-r.I_a / r.a).ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly);
    let lg: Vec<f64> = records.iter().map(|r| r.gradnorm.ln()).collect();
    let (gradient_slope, _) = linear_fit(&lx, &lg);
    let scaled: Vec<f64> = records
        .iter()
        .map(|r| r.beta_a.powf(s / (2.0 - s)) * r.I_a / r.a)
        .collect();
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let closest = records
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.beta_a.total_cmp(&y.1.beta_a))
        .map(|(i, _)| i)
        .unwrap();
    Ok(CriticalSweep {
        d,
        sigma: s,
        a_star,
        lambda0: l0,
        slope,
        intercept,
        expected_slope: -s / (2.0 - s),
        envelope: (lo, hi),
        limit_estimate: scaled[closest],
        gradient_slope,
        records,
        closest_minimiser: Some(minimisers.swap_remove(closest)),
    })
}

fn sweep_point(p: &ModelParams, a: f64, soliton: &FreeSoliton, l0: &Lambda0, opts: &SweepOptions) -> Result<(CriticalSweepRecord, RadialField)> {
    let d = p.d();
    let s = p.sigma();
    let b = beta_a(a, soliton.a_star, d);
    let flow = FlowOptions {
        max_steps: opts.max_steps,
        ..adapted_flow_options(a, soliton.a_star, l0, s, d, opts.n, opts.extent)
    };
    let m = minimize_energy_constrained(p, a, &flow)?;
    let h1_error = rescaled_convergence(&m.v, a, soliton.a_star, &soliton.q, s, d)?;
    let record = CriticalSweepRecord {
        a,
        beta_a: b,
        I_a: m.I_a,
        G_va: m.report.potential_G,
        kinetic_va: m.report.kinetic,
        h1_error,
        gradnorm: m.report.kinetic.sqrt(),
        lagrange_omega: m.lagrange_omega,
        flow_steps: m.flow_steps,
        el_residual: m.el_residual,
    };
    Ok((record, m.v))
}

/// H¹ distance between w_a(x) = β_a^{d/(2(2-σ))} v_a(β_a^{1/(2-σ)} x) and
/// λ₀^{d/2} Q(λ₀ x), both on Q's grid.
pub fn rescaled_convergence(v_a: &RadialField, a: f64, a_star: f64, q: &RadialField, sigma: f64, d: usize) -> Result<f64> {
    let (w, target) = rescaled_pair(v_a, a, a_star, q, sigma, d)?;
    h1_distance(&w, &target)
}

/// The pair (w_a, λ₀^{d/2} Q(λ₀ ·)) compared by `rescaled_convergence`.
pub fn rescaled_pair(v_a: &RadialField, a: f64, a_star: f64, q: &RadialField, sigma: f64, d: usize) -> Result<(RadialField, RadialField)> {
    let b = beta_a(a, a_star, d);
    if !(b > 0.0 && b < 1.0) {
        return Err(param("a", format!("need 0 < a < a*, got beta_a = {b}")));
    }
    let eps = b.powf(1.0 / (2.0 - sigma));
    let l0 = lambda0(q, sigma, d)?.lambda0;
    let g = q.grid.clone();
    // w_a has half-width (half-width of v_a)/ε on Q's grid.
    if half_width(v_a) / v_a.grid.h < MIN_HALF_WIDTH_NODES {
        return Err(Error::Resolution("v_a spans too few nodes across its half-width".into()));
    }
    let df = d as f64;
    let w = v_a.resample(g.clone(), |r| eps * r).scaled(eps.powf(df / 2.0));
    let target = q.resample(g, |r| l0 * r).scaled(l0.powf(df / 2.0));
    Ok((w, target))
}

/// Smallest K ≥ 1 with K⁻¹ β^{-σ/(2-σ)} ≤ G(v_a)/a ≤ K β^{-σ/(2-σ)} and
/// ||∇v_a||²/a ≤ K β^{-2/(2-σ)} over all records.
pub fn fit_scaling_constant(records: &[CriticalSweepRecord], sigma: f64) -> f64 {
    records.iter().fold(1.0f64, |k, r| {
        let gr = r.G_va / r.a * r.beta_a.powf(sigma / (2.0 - sigma));
        let kr = r.kinetic_va / r.a * r.beta_a.powf(2.0 / (2.0 - sigma));
        k.max(gr).max(1.0 / gr).max(kr)
    })
}

pub fn scaling_bounds_check(record: &CriticalSweepRecord, k: f64, sigma: f64) -> bool {
    // Slack for the records that set k exactly.
    let k = k * (1.0 + 1e-12);
    let scale_g = record.beta_a.powf(-sigma / (2.0 - sigma));
    let scale_k = record.beta_a.powf(-2.0 / (2.0 - sigma));
    let g = record.G_va / record.a;
    g >= scale_g / k && g <= k * scale_g && record.kinetic_va / record.a <= k * scale_k
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientDivergence {
    pub increasing: bool,
    /// ||∇v_a|| at the last sweep point over the first.
    pub growth: f64,
    pub slope: f64,
    pub expected_slope: f64,
    pub slope_within_10pct: bool,
}

pub fn gradient_divergence_check(sweep: &CriticalSweep) -> GradientDivergence {
    let g: Vec<f64> = sweep.records.iter().map(|r| r.gradnorm).collect();
    let expected = -1.0 / (2.0 - sweep.sigma);
    GradientDivergence {
        increasing: g.windows(2).all(|w| w[1] > w[0]),
        growth: g[g.len() - 1] / g[0],
        slope: sweep.gradient_slope,
        expected_slope: expected,
        slope_within_10pct: ((sweep.gradient_slope - expected) / expected).abs() <= 0.1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceProbe {
    pub a: f64,
    pub threshold: f64,
    pub final_energy: f64,
    pub steps: usize,
    /// ||∇v|| h at the end; near 1 the profile has shrunk to the grid scale.
    pub grid_scale: f64,
    pub below_threshold: bool,
}

/// Runs the normalised flow at mass `a` (≥ a*) and reports whether the energy
/// drops below -10 |i_ref|, with i_ref typically I(0.99 a*) from an adapted
/// grid. On any fixed grid the descent stops once the profile reaches the
/// grid scale, so `grid_scale` is reported alongside.
pub fn nonexistence_probe(p: &ModelParams, a: f64, i_ref: f64, opts: &FlowOptions) -> Result<NonexistenceProbe> {
    let out = normalized_flow(p, a, opts)?;
    let threshold = -10.0 * i_ref.abs();
    let e = out.result.I_a;
    Ok(NonexistenceProbe {
        a,
        threshold,
        final_energy: e,
        steps: out.result.flow_steps,
        grid_scale: out.result.report.kinetic.sqrt() * out.result.v.grid.h,
        below_threshold: e < threshold,
    })
}

/// Flow options on the grid adapted to mass a: extent `extent` times the
/// predicted width β_a^{1/(2-σ)}/λ₀, seeded at that width.
pub fn adapted_flow_options(a: f64, a_star: f64, l0: &Lambda0, sigma: f64, d: usize, n: usize, extent: f64) -> FlowOptions {
    let width = beta_a(a, a_star, d).powf(1.0 / (2.0 - sigma)) / l0.lambda0;
    FlowOptions {
        res: Resolution { n, r_max: extent * width },
        seed_width: width,
        a_star: Some(a_star),
        ..FlowOptions::default()
    }
}

/// Grid for trial energies: covers |x| ≤ 2 with `n` nodes.
pub fn trial_grid(d: usize, n: usize) -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(build_grid(d, 2.0, n)?))
}
