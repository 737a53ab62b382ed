//! Shooting on φ(0) for φ'' + (d-1)/r φ' + (c r^{-σ} - ω)φ + |φ|^α φ = 0.

use std::sync::Arc;

use serde::Serialize;

use super::{check_frequency, GroundStateResult, Resolution, Solver};
use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::functionals;
use crate::grid::RadialGrid;
use crate::ode::{hermite, Control, Dopri5};
use crate::params::ModelParams;

const R0: f64 = 1e-6;
/// Lower and upper limits of the φ(0) bracket scan.
pub const SCAN_LO: f64 = 1e-4;
pub const SCAN_HI: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShotExit {
    /// φ changed sign: φ(0) too large.
    CrossedZero,
    /// φ turned upwards or grew past 10 φ(0): φ(0) too small.
    BlewUp,
    /// Reached the end of the interval still positive and decreasing.
    Decayed,
}

#[derive(Debug, Clone)]
pub struct ShotOutcome {
    pub exit: ShotExit,
    pub r_exit: f64,
    /// Trajectory sampled at the grid nodes below r_exit, zero beyond.
    pub field: RadialField,
}

/// Local expansion φ0 + Σ c_k r^{p_k} about the singular point r = 0.
struct Series {
    terms: Vec<(f64, f64)>,
}

impl Series {
    fn new(p: &ModelParams, omega: f64, phi0: f64) -> Self {
        let d = p.d() as f64;
        let s = p.sigma();
        let c = p.coupling();
        let al = p.alpha();
        let a = -c * phi0 / ((2.0 - s) * (d - s));
        let b = (omega - phi0.powf(al)) * phi0 / (2.0 * d);
        let e = -c * a / ((4.0 - 2.0 * s) * (d + 2.0 - 2.0 * s));
        let f = -c * e / ((6.0 - 3.0 * s) * (d + 4.0 - 3.0 * s));
        let x = (-c * b + (omega - (al + 1.0) * phi0.powf(al)) * a) / ((4.0 - s) * (d + 2.0 - s));
        let terms = vec![
            (phi0, 0.0),
            (a, 2.0 - s),
            (b, 2.0),
            (e, 4.0 - 2.0 * s),
            (f, 6.0 - 3.0 * s),
            (x, 4.0 - s),
        ];
        Series {
            terms: terms.into_iter().filter(|t| t.0 != 0.0).collect(),
        }
    }

    fn value(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(c, q)| c * r.powf(q)).sum()
    }

    fn slope(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.1 != 0.0)
            .map(|&(c, q)| c * q * r.powf(q - 1.0))
            .sum()
    }
}

struct Trajectory {
    exit: ShotExit,
    r_exit: f64,
    /// Accepted steps (r, φ, φ').
    pts: Vec<(f64, f64, f64)>,
}

fn integrate_shot(p: &ModelParams, omega: f64, phi0: f64, r_end: f64, h_max: f64, record: bool) -> Result<Trajectory> {
    let d1 = p.d() as f64 - 1.0;
    let s = p.sigma();
    let c = p.coupling();
    let al = p.alpha();
    let series = Series::new(p, omega, phi0);
    let y0 = [series.value(R0), series.slope(R0)];
    let rhs = move |r: f64, y: &[f64; 2]| {
        let u = y[0];
        [y[1], -d1 / r * y[1] - (c * r.powf(-s) - omega) * u - u.abs().powf(al) * u]
    };
    let solver = Dopri5 {
        rtol: 1e-12,
        atol: 1e-16 * phi0,
        h_max,
        ..Dopri5::default()
    };
    let mut pts = Vec::new();
    if record {
        pts.push((R0, y0[0], y0[1]));
    }
    let mut exit = ShotExit::Decayed;
    let mut r_exit = r_end;
    let (_, y_end) = solver.integrate(rhs, R0, y0, r_end, R0, |r, y, _| {
        if record {
            pts.push((r, y[0], y[1]));
        }
        if y[0] < 0.0 {
            exit = ShotExit::CrossedZero;
        } else if y[1] > 0.0 || y[0] > 10.0 * phi0 {
            exit = ShotExit::BlewUp;
        } else {
            return Control::Continue;
        }
        r_exit = r;
        Control::Stop
    })?;
    // A positive solution that never left its level (e.g. the constant
    // φ = ω^{1/α} when c = 0) did not decay.
    if exit == ShotExit::Decayed && y_end[0] > 1e-6 * phi0 {
        exit = ShotExit::BlewUp;
    }
    Ok(Trajectory { exit, r_exit, pts })
}

/// Samples a recorded trajectory at the grid nodes below its exit radius.
/// Nodes closer to the origin than the start radius use the series.
fn sample(tr: &Trajectory, series: &Series, g: &RadialGrid) -> Vec<Option<f64>> {
    let mut out = vec![None; g.n];
    let mut k = 0;
    for (i, &r) in g.r.iter().enumerate() {
        if r <= R0 {
            out[i] = Some(series.value(r));
            continue;
        }
        while k + 1 < tr.pts.len() && tr.pts[k + 1].0 < r {
            k += 1;
        }
        if k + 1 >= tr.pts.len() {
            break;
        }
        let (r0, y0, d0) = tr.pts[k];
        let (r1, y1, d1) = tr.pts[k + 1];
        // Stop at the exit step: the last interval is where φ left its branch.
        if tr.exit != ShotExit::Decayed && r1 >= tr.r_exit {
            break;
        }
        out[i] = Some(hermite(r0, y0, d0, r1, y1, d1, r));
    }
    out
}

fn shot_end(g: &RadialGrid, omega: f64) -> f64 {
    (2.0 * g.r_max).max(60.0 / omega.sqrt())
}

/// One shot from φ(0) = phi0 outward, with the exit classification.
pub fn shoot_radial_ode(p: &ModelParams, omega: f64, phi0: f64, grid: Arc<RadialGrid>) -> Result<ShotOutcome> {
    if !(phi0 > 0.0 && phi0.is_finite()) {
        return Err(param("phi0", format!("need phi0 > 0, got {phi0}")));
    }
    check_frequency(p, &grid, omega)?;
    let tr = integrate_shot(p, omega, phi0, shot_end(&grid, omega), grid.h, true)?;
    let series = Series::new(p, omega, phi0);
    let vals: Vec<f64> = sample(&tr, &series, &grid).into_iter().map(|v| v.unwrap_or(0.0)).collect();
    Ok(ShotOutcome {
        exit: tr.exit,
        r_exit: tr.r_exit,
        field: RadialField::from_real(grid, &vals)?,
    })
}

/// Scan range and density for the initial bracket on φ(0).
#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub scan_lo: f64,
    pub scan_hi: f64,
    pub points_per_decade: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            scan_lo: SCAN_LO,
            scan_hi: SCAN_HI,
            points_per_decade: 10,
        }
    }
}

fn classify(p: &ModelParams, omega: f64, phi0: f64, r_end: f64) -> Result<ShotExit> {
    Ok(integrate_shot(p, omega, phi0, r_end, f64::INFINITY, false)?.exit)
}

/// Bisection on φ(0) between an undershoot and an overshoot, to the limit
/// of double precision. Returns (lo, hi).
fn bisect_phi0(p: &ModelParams, omega: f64, r_end: f64, opts: &ShootingOptions) -> Result<(f64, f64)> {
    let decades = (opts.scan_hi / opts.scan_lo).log10();
    let m = (decades * opts.points_per_decade as f64).ceil() as usize;
    let mut prev: Option<(f64, ShotExit)> = None;
    let mut bracket = None;
    for k in 0..=m {
        let x = opts.scan_lo * (opts.scan_hi / opts.scan_lo).powf(k as f64 / m as f64);
        let e = classify(p, omega, x, r_end)?;
        if e == ShotExit::Decayed {
            return Ok((x, x));
        }
        if let Some((xp, ep)) = prev {
            if ep == ShotExit::BlewUp && e == ShotExit::CrossedZero {
                bracket = Some((xp, x));
                break;
            }
        }
        prev = Some((x, e));
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Bracketing(format!(
            "no undershoot/overshoot pair for phi(0) in [{:e}, {:e}]",
            opts.scan_lo, opts.scan_hi
        ))
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(p, omega, mid, r_end)? {
            ShotExit::BlewUp => lo = mid,
            ShotExit::CrossedZero => hi = mid,
            ShotExit::Decayed => return Ok((mid, mid)),
        }
    }
    Ok((lo, hi))
}

/// Decaying tail solution from the cut outward, integrated backward through
/// the Riccati variable y = T'/T. The nonlinearity is frozen at the previous
/// iterate (zero on the first pass), so a few passes converge at the rate
/// φ^α at the cut. Returns φ at the nodes from `first` on, matched to `base`
/// at r_ref.
fn tail_profile(p: &ModelParams, omega: f64, g: &RadialGrid, first: usize, r_ref: f64, base: f64) -> Result<Vec<f64>> {
    const PASSES: usize = 4;
    let d1 = p.d() as f64 - 1.0;
    let s = p.sigma();
    let c = p.coupling();
    let al = p.alpha();
    let r_far = g.r_max + 5.0 / omega.sqrt();
    let y_far = -omega.sqrt() - d1 / (2.0 * r_far);
    let solver = Dopri5 {
        rtol: 1e-12,
        atol: 1e-14,
        h_max: g.h,
        ..Dopri5::default()
    };
    // Points (r, log T - log T(r_ref), y) in increasing r.
    let mut prev: Vec<(f64, f64, f64)> = Vec::new();
    for _ in 0..PASSES {
        let frozen = |r: f64| -> f64 {
            if prev.is_empty() {
                return 0.0;
            }
            let k = prev.partition_point(|q| q.0 < r).clamp(1, prev.len() - 1);
            let (r0, l0, y0) = prev[k - 1];
            let (r1, l1, y1) = prev[k];
            (base * hermite(r0, l0, y0, r1, l1, y1, r).exp()).powf(al)
        };
        let rhs = |r: f64, y: &[f64; 2]| [-y[0] * y[0] - d1 / r * y[0] + omega - c * r.powf(-s) - frozen(r), y[0]];
        let mut pts = vec![(r_far, 0.0, y_far)];
        solver.integrate(rhs, r_far, [y_far, 0.0], r_ref, g.h, |r, y, _| {
            pts.push((r, y[1], y[0]));
            Control::Continue
        })?;
        pts.reverse();
        let l_ref = pts[0].1;
        pts.iter_mut().for_each(|q| q.1 -= l_ref);
        prev = pts;
    }
    let mut out = Vec::with_capacity(g.n - first);
    let mut k = 0;
    for &r in &g.r[first..] {
        while k + 2 < prev.len() && prev[k + 1].0 < r {
            k += 1;
        }
        let (r0, l0, y0) = prev[k];
        let (r1, l1, y1) = prev[k + 1];
        out.push(base * hermite(r0, l0, y0, r1, l1, y1, r).exp());
    }
    Ok(out)
}

/// Relative spread between the bracketing trajectories beyond which the
/// profile switches to the tail solution.
const DIVERGENCE_TOL: f64 = 1e-9;
const TAIL_LEVEL: f64 = 1e-7;

fn profile_from_bracket(
    p: &ModelParams,
    omega: f64,
    lo: f64,
    hi: f64,
    g: &Arc<RadialGrid>,
    r_end: f64,
) -> Result<Vec<f64>> {
    let tl = integrate_shot(p, omega, lo, r_end, g.h, true)?;
    let th = integrate_shot(p, omega, hi, r_end, g.h, true)?;
    let sl = sample(&tl, &Series::new(p, omega, lo), g);
    let sh = sample(&th, &Series::new(p, omega, hi), g);
    let phi0 = 0.5 * (lo + hi);
    let mut vals = vec![0.0; g.n];
    let mut cut = g.n;
    for i in 0..g.n {
        match (sl[i], sh[i]) {
            (Some(a), Some(b)) => {
                let m = 0.5 * (a + b);
                if (a - b).abs() > DIVERGENCE_TOL * m.abs() || m < TAIL_LEVEL * phi0 {
                    cut = i;
                    break;
                }
                vals[i] = m;
            }
            _ => {
                cut = i;
                break;
            }
        }
    }
    if cut < 8 {
        return Err(Error::Resolution(format!(
            "shooting trajectories separate after {cut} nodes; grid too coarse for the profile"
        )));
    }
    if cut < g.n {
        let r_ref = g.r[cut - 1];
        let base = vals[cut - 1];
        let tail = tail_profile(p, omega, g, cut, r_ref, base)?;
        vals[cut..].copy_from_slice(&tail);
    }
    Ok(vals)
}

/// Positive decaying solution by bisection on φ(0), sampled on the grid
/// described by `res`.
pub fn find_ground_state_shooting(p: &ModelParams, omega: f64, res: &Resolution) -> Result<GroundStateResult> {
    find_ground_state_shooting_with(p, omega, res, &ShootingOptions::default())
}

pub fn find_ground_state_shooting_with(
    p: &ModelParams,
    omega: f64,
    res: &Resolution,
    opts: &ShootingOptions,
) -> Result<GroundStateResult> {
    let g = res.grid(p.d())?;
    check_frequency(p, &g, omega)?;
    let r_end = shot_end(&g, omega);
    let (lo, hi) = bisect_phi0(p, omega, r_end, opts)?;
    let vals = profile_from_bracket(p, omega, lo, hi, &g, r_end)?;
    let phi = RadialField::from_real(g, &vals)?;
    GroundStateResult::assemble(phi, p, omega, 0, Solver::Shooting)
}

#[derive(Debug, Clone)]
pub struct FreeSoliton {
    /// Positive solution of -ΔQ + Q - |Q|^{4/d} Q = 0.
    pub q: RadialField,
    pub a_star: f64,
    pub q0: f64,
    /// (|m - 2k/d| / m, |m - 2P/(d+2)| / m).
    pub pohozaev_chain: (f64, f64),
}

/// Free mass-critical soliton Q (coupling 0, α = 4/d, ω = 1) and a* = ||Q||².
pub fn solve_free_soliton(d: usize, res: &Resolution) -> Result<FreeSoliton> {
    let sigma = 0.5 * (d as f64).min(2.0);
    let p = ModelParams::mass_critical(d, sigma)?.with_coupling(0.0)?;
    let g = res.grid(d)?;
    let r_end = shot_end(&g, 1.0);
    let (lo, hi) = bisect_phi0(&p, 1.0, r_end, &ShootingOptions::default())?;
    let vals = profile_from_bracket(&p, 1.0, lo, hi, &g, r_end)?;
    let q = RadialField::from_real(g, &vals)?;
    let r = functionals(&q, &p, 1.0)?;
    let df = d as f64;
    let m = r.mass;
    Ok(FreeSoliton {
        a_star: m,
        q0: 0.5 * (lo + hi),
        pohozaev_chain: (
            (m - 2.0 * r.kinetic / df).abs() / m,
            (m - 2.0 * r.power_Lp / (df + 2.0)).abs() / m,
        ),
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_satisfies_equation_to_leading_orders() {
        let p = ModelParams::new(3, 0.5, 2.0).unwrap();
        let (omega, phi0) = (1.3, 2.0);
        let s = Series::new(&p, omega, phi0);
        // Residual of the ODE at small r with numerically differentiated series.
        for &r in &[1e-4, 1e-3] {
            let h = r * 1e-3;
            let f = |x: f64| s.value(x);
            let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
            let d1 = s.slope(r);
            let u = f(r);
            let res = d2 + 2.0 / r * d1 + (r.powf(-0.5) - omega) * u + u.powi(3);
            // Leading potential term is of size r^{-σ} φ0; the residual is
            // several orders smaller.
            assert!(res.abs() < 1e-3 * r.powf(-0.5) * phi0, "r={r} res={res}");
        }
    }
}
