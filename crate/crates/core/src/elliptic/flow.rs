//! Normalised gradient flow for I(a) = inf { E(v) : ||v||² = a }.

use super::{ConstrainedMinResult, Resolution};
use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::{components_real, FunctionalReport};
use crate::linalg::Tridiag;
use crate::params::ModelParams;
use crate::spectral::ground_eigenpair;

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub res: Resolution,
    /// Width s of the seed e^{-r²/(2s²)}.
    pub seed_width: f64,
    pub max_steps: usize,
    /// Critical mass, if already known; computed on demand when α = 4/d.
    pub a_star: Option<f64>,
    pub energy_tol: f64,
    pub residual_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            res: Resolution::default(),
            seed_width: 1.0,
            max_steps: 100_000,
            a_star: None,
            energy_tol: 1e-12,
            residual_tol: 1e-6,
        }
    }
}

/// Raw flow result; `converged` is false when the step budget ran out.
#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub result: ConstrainedMinResult,
    pub converged: bool,
}

/// Accepted steps may raise the energy by at most this relative amount
/// (roundoff in the mass renormalisation).
const ENERGY_SLACK: f64 = 1e-13;
const TAU_MAX: f64 = 1e4;

fn backtrack(tau: &mut f64) -> bool {
    *tau *= 0.5;
    *tau >= 1e-30
}

fn underflow() -> Error {
    Error::Convergence {
        what: "normalized_flow",
        detail: "time step underflow while backtracking".into(),
    }
}

struct Ops<'a> {
    g: &'a crate::grid::RadialGrid,
    pw: Vec<f64>,
    kd: Vec<f64>,
    ko: Vec<f64>,
    c: f64,
    al: f64,
}

impl Ops<'_> {
    fn energy(&self, v: &[f64]) -> f64 {
        let cm = components_real(self.g, &self.pw, self.al, v);
        cm.kinetic / 2.0 - self.c * cm.g_raw / 2.0 - cm.power / (self.al + 2.0)
    }

    fn mass(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.g.w).map(|(x, w)| w * x * x).sum()
    }

    /// EL(v) = -Δv - c|x|^{-σ}v - |v|^α v at the nodes.
    fn el(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut kv = self.kd[i] * v[i];
                if i > 0 {
                    kv += self.ko[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    kv += self.ko[i] * v[i + 1];
                }
                (kv - self.c * self.pw[i] * v[i]) / self.g.w[i] - v[i].abs().powf(self.al) * v[i]
            })
            .collect()
    }

    /// Least-squares multiplier ω with EL(v) ≈ -ω v over nodes where |v| > 1e-8,
    /// and the relative residual of EL(v) + ω v.
    fn multiplier(&self, v: &[f64]) -> (f64, f64) {
        let e = self.el(v);
        let w = &self.g.w;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..v.len() {
            if v[i].abs() > 1e-8 {
                num += w[i] * e[i] * v[i];
                den += w[i] * v[i] * v[i];
            }
        }
        let om = -num / den;
        let (mut r2, mut n2, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..v.len() {
            r2 += w[i] * (e[i] + om * v[i]).powi(2);
            n2 += w[i] * (v[i].abs().powf(self.al) * v[i]).powi(2);
            m2 += w[i] * v[i] * v[i];
        }
        (om, r2.sqrt() / (n2.sqrt() + om.abs() * m2.sqrt()))
    }
}

/// Backward-Euler normalised gradient flow with a stabilising shift, run
/// without any existence check. Each step solves
///   (W/τ + K - cG - W|v|^α + ω_k W) ṽ = (1/τ + ω_k) W v
/// and rescales ṽ to mass a. The nonlinearity is frozen at v but acts on ṽ,
/// so a fixed point solves the Euler–Lagrange equation with multiplier; for
/// large τ the step is inverse iteration on -Δ - c|x|^{-σ} - |v|^α shifted
/// by ω_k. τ grows by 1.5 after accepted steps and halves whenever the
/// energy would rise or the step matrix is singular.
pub fn normalized_flow(p: &ModelParams, a: f64, opts: &FlowOptions) -> Result<FlowOutcome> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(param("a", format!("need a > 0, got {a}")));
    }
    let g = opts.res.grid(p.d())?;
    let mu1 = ground_eigenpair(p, g.clone())?.mu1;
    let (kd, ko) = g.stiffness();
    let ops = Ops {
        g: &g,
        pw: g.potential_weights(p.sigma()),
        kd,
        ko,
        c: p.coupling(),
        al: p.alpha(),
    };
    let n = g.n;
    let s2 = 2.0 * opts.seed_width * opts.seed_width;
    let mut v: Vec<f64> = g.r.iter().map(|&r| (-r * r / s2).exp()).collect();
    let sc = (a / ops.mass(&v)).sqrt();
    v.iter_mut().for_each(|x| *x *= sc);
    let mut e = ops.energy(&v);
    let mut history = vec![e];
    let mut tau = 0.5 * g.h * g.h;
    let mut steps = 0;
    let mut converged = false;
    let om_floor = -mu1 + 1e-6 * (1.0 + mu1.abs());
    let (mut om, mut resid) = ops.multiplier(&v);
    let mut attempts = 0;
    while steps < opts.max_steps && attempts < 20 * opts.max_steps {
        attempts += 1;
        let ok = om.max(om_floor);
        let diag: Vec<f64> = (0..n)
            .map(|i| g.w[i] * (1.0 / tau + ok - v[i].abs().powf(ops.al)) + ops.kd[i] - ops.c * ops.pw[i])
            .collect();
        let Some(lu) = Tridiag::factor(&ops.ko, &diag, &ops.ko) else {
            if !backtrack(&mut tau) {
                return Err(underflow());
            }
            continue;
        };
        let mut nv: Vec<f64> = (0..n).map(|i| g.w[i] * (1.0 / tau + ok) * v[i]).collect();
        lu.solve_in_place(&mut nv);
        let sc = (a / ops.mass(&nv)).sqrt();
        nv.iter_mut().for_each(|x| *x *= sc);
        let ne = ops.energy(&nv);
        if !ne.is_finite() || ne > e + ENERGY_SLACK * e.abs() {
            if !backtrack(&mut tau) {
                return Err(underflow());
            }
            continue;
        }
        let de = e - ne;
        v = nv;
        e = ne;
        history.push(e);
        steps += 1;
        tau = (tau * 1.5).min(TAU_MAX);
        (om, resid) = ops.multiplier(&v);
        if de.abs() < opts.energy_tol * e.abs() && resid < opts.residual_tol {
            converged = true;
            break;
        }
    }
    let field = RadialField::from_real(g.clone(), &v)?;
    let cm = components_real(&field.grid, &ops.pw, ops.al, &v);
    let report = FunctionalReport::assemble(&cm, p, om);
    Ok(FlowOutcome {
        result: ConstrainedMinResult {
            v: field,
            a,
            I_a: e,
            lagrange_omega: om,
            report,
            flow_steps: steps,
            el_residual: resid,
            energy_history: history,
        },
        converged,
    })
}

/// Mass-constrained energy minimiser. Rejects α > 4/d (energy unbounded
/// below) and α = 4/d with a >= a* (no minimiser).
pub fn minimize_energy_constrained(p: &ModelParams, a: f64, opts: &FlowOptions) -> Result<ConstrainedMinResult> {
    match p.mass_regime() {
        1 => {
            return Err(Error::UnboundedBelow {
                alpha: p.alpha(),
                critical: 4.0 / p.d() as f64,
            })
        }
        0 => {
            let a_star = match opts.a_star {
                Some(s) => s,
                None => super::solve_free_soliton(p.d(), &Resolution::for_omega(1.0))?.a_star,
            };
            if a >= a_star {
                return Err(Error::SupercriticalMass { a, a_star });
            }
        }
        _ => {}
    }
    let out = normalized_flow(p, a, opts)?;
    if !out.converged {
        return Err(Error::Convergence {
            what: "minimize_energy_constrained",
            detail: format!(
                "{} steps, residual {:.3e}, energy {:.12e}",
                out.result.flow_steps, out.result.el_residual, out.result.I_a
            ),
        });
    }
    Ok(out.result)
}
