//! Radial time evolution of i u_t + Δu + c|x|^{-σ}u + |u|^α u = 0 by Strang
//! splitting, with conservation and virial monitoring, a blow-up detector and
//! the orbital-stability experiment.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{minimize_energy_constrained, ConstrainedMinResult, FlowOptions};
use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::{components, FunctionalReport};
use crate::grid::RadialGrid;
use crate::linalg::Tridiag;
use crate::params::ModelParams;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunEnd {
    Completed,
    /// ||∇u|| exceeded the growth factor times its initial value.
    GradientLimit,
    /// ||∇u|| h > 1: the grid no longer resolves the solution.
    ResolutionLimit,
    /// A non-finite value appeared.
    NonFinite,
    /// Amplitude at r_max exceeded the boundary tolerance.
    BoundaryReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BlowupVerdict {
    Global,
    BlewUp { t_star: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub mass_t: Vec<f64>,
    pub energy_t: Vec<f64>,
    pub variance_t: Vec<f64>,
    #[serde(rename = "virialQ_t")]
    pub virial_q_t: Vec<f64>,
    pub gradnorm_t: Vec<f64>,
    pub t_target: f64,
    pub end: RunEnd,
    pub verdict: BlowupVerdict,
    /// Grid spacing, for the resolution criterion.
    pub h: f64,
    /// Smallest substep used.
    pub dt_min: f64,
    #[serde(skip)]
    pub final_state: Option<RadialField>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Trace samples are recorded every `out_every` base steps.
    pub out_every: usize,
    /// Shrink the step like (||∇u₀|| / ||∇u||)² as the solution focuses.
    pub adaptive: bool,
    pub max_levels: u32,
    pub blowup_factor: f64,
    /// Largest tolerated mass fraction in the outer tenth of the box.
    pub boundary_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            out_every: 10,
            adaptive: true,
            max_levels: 24,
            blowup_factor: 1e3,
            boundary_tol: 1e-4,
        }
    }
}

/// One Strang step: half phase rotation, Crank–Nicolson for i u_t + Δu = 0,
/// half phase rotation. Factorisations are cached per step size.
pub struct Propagator {
    g: Arc<RadialGrid>,
    vpot: Vec<f64>,
    alpha: f64,
    kd: Vec<f64>,
    ko: Vec<f64>,
    cache: Vec<(f64, Tridiag<Complex64>)>,
}

impl Propagator {
    pub fn new(p: &ModelParams, g: Arc<RadialGrid>) -> Self {
        let pw = g.potential_weights(p.sigma());
        // Cell-averaged potential, consistent with the quadrature of G.
        let vpot = pw.iter().zip(&g.w).map(|(a, w)| p.coupling() * a / w).collect();
        let (kd, ko) = g.stiffness();
        Propagator {
            g,
            vpot,
            alpha: p.alpha(),
            kd,
            ko,
            cache: Vec::new(),
        }
    }

    fn phase(&self, u: &mut [Complex64], tau: f64) {
        for (z, v) in u.iter_mut().zip(&self.vpot) {
            let th = tau * (v + z.norm().powf(self.alpha));
            *z *= Complex64::from_polar(1.0, th);
        }
    }

    fn factor(&mut self, dt: f64) -> usize {
        if let Some(k) = self.cache.iter().position(|(s, _)| *s == dt) {
            return k;
        }
        let i = Complex64::i();
        let n = self.g.n;
        let diag: Vec<Complex64> = (0..n).map(|j| self.g.w[j] + i * (dt / 2.0) * self.kd[j]).collect();
        let off: Vec<Complex64> = self.ko.iter().map(|&o| i * (dt / 2.0) * o).collect();
        // W + i dt/2 K is nonsingular for real dt: its Hermitian part is W.
        let lu = Tridiag::factor(&off, &diag, &off).expect("W + i dt K/2 is invertible");
        if self.cache.len() > 32 {
            self.cache.remove(0);
        }
        self.cache.push((dt, lu));
        self.cache.len() - 1
    }

    fn linear(&mut self, u: &mut [Complex64], dt: f64) {
        let n = u.len();
        let i = Complex64::i();
        let c = i * (dt / 2.0);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut ku = self.kd[j] * u[j];
            if j > 0 {
                ku += self.ko[j - 1] * u[j - 1];
            }
            if j + 1 < n {
                ku += self.ko[j] * u[j + 1];
            }
            rhs[j] = self.g.w[j] * u[j] - c * ku;
        }
        let k = self.factor(dt);
        self.cache[k].1.solve_in_place(&mut rhs);
        u.copy_from_slice(&rhs);
    }

    /// Advances by dt; a negative dt runs the exact inverse step.
    pub fn step(&mut self, u: &mut [Complex64], dt: f64) {
        self.phase(u, dt / 2.0);
        self.linear(u, dt);
        self.phase(u, dt / 2.0);
    }
}

/// Share of the mass in the outer tenth of the box, where the Dirichlet edge
/// starts to reflect.
fn outer_mass_fraction(g: &RadialGrid, u: &[Complex64]) -> f64 {
    let cut = 0.9 * g.r_max;
    let (mut outer, mut total) = (0.0, 0.0);
    for ((z, w), r) in u.iter().zip(&g.w).zip(&g.r) {
        let m = w * z.norm_sqr();
        total += m;
        if *r > cut {
            outer += m;
        }
    }
    outer / total
}

fn variance(g: &RadialGrid, u: &[Complex64]) -> f64 {
    u.iter().zip(g.w.iter().zip(&g.r)).map(|(z, (w, r))| w * r * r * z.norm_sqr()).sum()
}

struct Sample {
    report: FunctionalReport,
    variance: f64,
}

fn sample(u: &[Complex64], g: &Arc<RadialGrid>, p: &ModelParams) -> Result<Sample> {
    let f = RadialField {
        grid: g.clone(),
        values: u.to_vec(),
    };
    let c = components(&f, p)?;
    Ok(Sample {
        report: FunctionalReport::assemble(&c, p, 0.0),
        variance: variance(g, u),
    })
}

/// Evolves u0 to t_end with base step dt, recording the trace every
/// `out_every` steps.
pub fn evolve(u0: &RadialField, p: &ModelParams, dt: f64, t_end: f64, opts: &EvolveOptions) -> Result<EvolutionTrace> {
    evolve_observed(u0, p, dt, t_end, opts, &mut |_, _| {})
}

/// As `evolve`, calling `observe(t, u)` at every trace sample.
pub fn evolve_observed(
    u0: &RadialField,
    p: &ModelParams,
    dt: f64,
    t_end: f64,
    opts: &EvolveOptions,
    observe: &mut dyn FnMut(f64, &[Complex64]),
) -> Result<EvolutionTrace> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(param("dt", format!("need dt > 0, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(param("T", format!("need T > 0, got {t_end}")));
    }
    if opts.out_every == 0 {
        return Err(param("out_every", "must be at least 1"));
    }
    if u0.is_zero() {
        return Err(param("u0", "initial datum is zero"));
    }
    let g = u0.grid.clone();
    let mut prop = Propagator::new(p, g.clone());
    let mut u = u0.values.clone();
    let interval = dt * opts.out_every as f64;
    let n_out = (t_end / interval).round() as usize;
    let mut trace = EvolutionTrace {
        times: Vec::with_capacity(n_out + 1),
        mass_t: Vec::new(),
        energy_t: Vec::new(),
        variance_t: Vec::new(),
        virial_q_t: Vec::new(),
        gradnorm_t: Vec::new(),
        t_target: t_end,
        end: RunEnd::Completed,
        verdict: BlowupVerdict::Inconclusive,
        h: g.h,
        dt_min: dt,
        final_state: None,
    };
    let push = |trace: &mut EvolutionTrace, t: f64, s: &Sample| {
        trace.times.push(t);
        trace.mass_t.push(s.report.mass);
        trace.energy_t.push(s.report.energy_E);
        trace.variance_t.push(s.variance);
        trace.virial_q_t.push(s.report.virial_Q);
        trace.gradnorm_t.push(s.report.kinetic.sqrt());
    };
    let s0 = sample(&u, &g, p)?;
    let g0 = s0.report.kinetic.sqrt();
    push(&mut trace, 0.0, &s0);
    observe(0.0, &u);
    let mut grad = g0;
    for k in 1..=n_out {
        let level = if opts.adaptive && grad > g0 {
            ((grad / g0).powi(2).log2().ceil().max(0.0) as u32).min(opts.max_levels)
        } else {
            0
        };
        let sub = 1usize << level;
        let ddt = dt / sub as f64;
        trace.dt_min = trace.dt_min.min(ddt);
        for _ in 0..opts.out_every * sub {
            prop.step(&mut u, ddt);
        }
        let t = k as f64 * interval;
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            trace.end = RunEnd::NonFinite;
            break;
        }
        let s = sample(&u, &g, p)?;
        push(&mut trace, t, &s);
        observe(t, &u);
        grad = s.report.kinetic.sqrt();
        if grad > opts.blowup_factor * g0 {
            trace.end = RunEnd::GradientLimit;
            break;
        }
        if grad * g.h > 1.0 {
            trace.end = RunEnd::ResolutionLimit;
            break;
        }
        if outer_mass_fraction(&g, &u) > opts.boundary_tol {
            trace.end = RunEnd::BoundaryReached;
            break;
        }
    }
    trace.verdict = detect_blowup(&trace, &s0.report);
    if trace.end != RunEnd::NonFinite {
        trace.final_state = Some(RadialField::new(g, u)?);
    }
    Ok(trace)
}

/// max over interior samples of |V'' - 8Q| / (1 + |8Q|), V'' by centred
/// second differences. Samples must be uniformly spaced.
pub fn virial_check(trace: &EvolutionTrace) -> Result<f64> {
    let t = &trace.times;
    if t.len() < 5 {
        return Err(param("trace", format!("need at least 5 samples, got {}", t.len())));
    }
    let dt = t[1] - t[0];
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(param("trace", "samples are not uniformly spaced"));
        }
    }
    let v = &trace.variance_t;
    let mut worst = 0.0f64;
    for k in 1..t.len() - 1 {
        let d2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dt * dt);
        let q8 = 8.0 * trace.virial_q_t[k];
        worst = worst.max((d2 - q8).abs() / (1.0 + q8.abs()));
    }
    Ok(worst)
}

/// Variance concave over the final quarter of the resolved trace and, extrapolated
/// with the last slope and curvature, reaching zero before t_target.
fn variance_collapsing(trace: &EvolutionTrace) -> bool {
    // The sample that tripped the resolution limit is itself unresolved.
    let n = trace.times.len() - usize::from(trace.end == RunEnd::ResolutionLimit);
    if n < 5 {
        return false;
    }
    let tail = (n / 4).max(2);
    if trace.virial_q_t[n - tail..n].iter().any(|&q| q >= 0.0) {
        return false;
    }
    let (t1, t0) = (trace.times[n - 1], trace.times[n - 2]);
    let v = trace.variance_t[n - 1];
    let dv = (v - trace.variance_t[n - 2]) / (t1 - t0);
    let a = 4.0 * trace.virial_q_t[n - 1];
    // v + dv s + a s² = 0 with a < 0 has exactly one positive root.
    let s = (-dv - (dv * dv - 4.0 * a * v).sqrt()) / (2.0 * a);
    t1 + s <= trace.t_target
}

/// Blow-up when ||∇u|| grew past the factor, or when the grid stopped
/// resolving the solution while the variance was collapsing. Global when
/// the run reached its final time with ||∇u|| over the second half at most
/// twice its maximum over the first half. Anything else is inconclusive.
pub fn detect_blowup(trace: &EvolutionTrace, u0_report: &FunctionalReport) -> BlowupVerdict {
    let t_last = *trace.times.last().unwrap_or(&0.0);
    let g0 = u0_report.kinetic.sqrt();
    let gmax = trace.gradnorm_t.iter().fold(0.0f64, |m, &x| m.max(x));
    match trace.end {
        RunEnd::GradientLimit => BlowupVerdict::BlewUp { t_star: t_last },
        RunEnd::ResolutionLimit | RunEnd::NonFinite => {
            if variance_collapsing(trace) && gmax > 10.0 * g0 {
                BlowupVerdict::BlewUp { t_star: t_last }
            } else {
                BlowupVerdict::Inconclusive
            }
        }
        RunEnd::BoundaryReached => BlowupVerdict::Inconclusive,
        RunEnd::Completed => {
            let n = trace.gradnorm_t.len();
            let half = n / 2;
            let first = trace.gradnorm_t[..=half].iter().fold(0.0f64, |m, &x| m.max(x));
            let second = trace.gradnorm_t[half..].iter().fold(0.0f64, |m, &x| m.max(x));
            if second <= 2.0 * first {
                BlowupVerdict::Global
            } else {
                BlowupVerdict::Inconclusive
            }
        }
    }
}

/// (⟨u, v⟩_{H¹}, ||u||²_{H¹}) with the discrete gradient of the quadrature.
fn h1_inner(g: &RadialGrid, u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let n = g.n;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        s += g.w[i] * u[i] * v[i].conj();
    }
    let mut k = Complex64::new(0.0, 0.0);
    for f in 1..=n {
        let zero = Complex64::new(0.0, 0.0);
        let du = if f == n { zero } else { u[f] } - u[f - 1];
        let dv = if f == n { zero } else { v[f] } - v[f - 1];
        k += g.face_area[f] * du * dv.conj();
    }
    s + k / g.h
}

/// inf over θ of ||u - e^{iθ} v||_{H¹}. The infimum is attained at
/// θ = arg⟨u, v⟩_{H¹}, giving ||u||² + ||v||² - 2|⟨u, v⟩|.
pub fn phase_distance(u: &[Complex64], v: &[Complex64], g: &RadialGrid) -> f64 {
    let uu = h1_inner(g, u, u).re;
    let vv = h1_inner(g, v, v).re;
    let uv = h1_inner(g, u, v).norm();
    (uu + vv - 2.0 * uv).max(0.0).sqrt()
}

/// Smooth complex perturbation with ||ψ||_{H¹} = delta, a sum of six random
/// Gaussian shells drawn from a ChaCha stream.
pub fn random_perturbation(g: &Arc<RadialGrid>, delta: f64, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, Complex64)> = (0..6)
        .map(|_| {
            let c = rng.gen_range(0.0..4.0);
            let s = rng.gen_range(0.5..2.0);
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (c, s, a)
        })
        .collect();
    let vals: Vec<Complex64> = g
        .r
        .iter()
        .map(|&r| {
            bumps
                .iter()
                .map(|&(c, s, a)| a * (-(r - c).powi(2) / (2.0 * s * s)).exp())
                .sum()
        })
        .collect();
    let norm = h1_inner(g, &vals, &vals).re.sqrt();
    let scale = if norm > 0.0 { delta / norm } else { 0.0 };
    RadialField {
        grid: g.clone(),
        values: vals.into_iter().map(|z| z * scale).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub max_distance: f64,
    pub end: RunEnd,
    /// (t, distance) at every trace sample.
    pub distances: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub a: f64,
    pub delta: f64,
    pub t_end: f64,
    pub i_a: f64,
    pub lagrange_omega: f64,
    pub max_distance: f64,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    pub flow: FlowOptions,
    pub dt: f64,
    pub evolve: EvolveOptions,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            flow: FlowOptions::default(),
            dt: 2e-3,
            evolve: EvolveOptions {
                out_every: 50,
                ..EvolveOptions::default()
            },
            seed: 0,
        }
    }
}

/// Perturbs the mass-constrained minimiser v_a by `trials` independent
/// perturbations of H¹ size `delta`, evolves each to t_end and records the
/// phase-minimised distance to the orbit of v_a.
pub fn stability_experiment(
    p: &ModelParams,
    a: f64,
    delta: f64,
    t_end: f64,
    trials: usize,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(param("delta", format!("need delta >= 0, got {delta}")));
    }
    if trials == 0 {
        return Err(param("trials", "need at least one trial"));
    }
    let min = minimize_energy_constrained(p, a, &opts.flow)?;
    stability_from_minimiser(p, &min, delta, t_end, trials, opts)
}

pub fn stability_from_minimiser(
    p: &ModelParams,
    min: &ConstrainedMinResult,
    delta: f64,
    t_end: f64,
    trials: usize,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let va = &min.v;
    let g = va.grid.clone();
    let results: Vec<Result<TrialResult>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let seed = opts.seed.wrapping_add(k as u64);
            let psi = random_perturbation(&g, delta, seed);
            let u0 = va.add(&psi)?;
            let mut distances = Vec::new();
            let trace = evolve_observed(&u0, p, opts.dt, t_end, &opts.evolve, &mut |t, u| {
                distances.push((t, phase_distance(u, &va.values, &g)));
            })?;
            let max_distance = distances.iter().fold(0.0f64, |m, &(_, x)| m.max(x));
            Ok(TrialResult {
                seed,
                max_distance,
                end: trace.end,
                distances,
            })
        })
        .collect();
    let trials: Vec<TrialResult> = results.into_iter().collect::<Result<_>>()?;
    if let Some(t) = trials.iter().find(|t| t.end != RunEnd::Completed) {
        if t.end == RunEnd::BoundaryReached {
            return Err(Error::Resolution(format!("trial with seed {} reached the edge of the box", t.seed)));
        }
        return Err(Error::Convergence {
            what: "stability_experiment",
            detail: format!("trial with seed {} left the resolved regime (instability evidence)", t.seed),
        });
    }
    Ok(StabilityReport {
        a: min.a,
        delta,
        t_end,
        i_a: min.I_a,
        lagrange_omega: min.lagrange_omega,
        max_distance: trials.iter().fold(0.0f64, |m, t| m.max(t.max_distance)),
        trials,
    })
}
