//! Stationary problems: the radial ground state φ_ω, the constrained
//! minimiser of the energy at fixed mass, and the free soliton Q.

mod descent;
mod flow;
mod shooting;

use std::sync::Arc;

use serde::Serialize;

pub use descent::{minimize_action, nehari_project};
pub use flow::{minimize_energy_constrained, normalized_flow, FlowOptions, FlowOutcome};
pub use shooting::{
    find_ground_state_shooting, find_ground_state_shooting_with, shoot_radial_ode,
    solve_free_soliton, FreeSoliton, ShootingOptions, ShotExit, ShotOutcome,
};

use crate::error::{param, Result};
use crate::field::RadialField;
use crate::functionals::{functionals, FunctionalReport};
use crate::grid::{build_grid, RadialGrid};
use crate::params::ModelParams;

/// Grid extent and size used by the stationary solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub n: usize,
    pub r_max: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            n: 1 << 14,
            r_max: 40.0,
        }
    }
}

impl Resolution {
    /// Fine grid adapted to the e^{-√ω r} decay of a ground state.
    pub fn for_omega(omega: f64) -> Self {
        Resolution {
            n: 1 << 16,
            r_max: 30.0 / omega.sqrt(),
        }
    }

    pub fn grid(&self, d: usize) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(build_grid(d, self.r_max, self.n)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Solver {
    Shooting,
    Descent,
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub phi: RadialField,
    pub omega: f64,
    /// S_ω(φ).
    pub action_d: f64,
    pub report: FunctionalReport,
    pub pohozaev_residuals: (f64, f64),
    pub iterations: usize,
    pub solver: Solver,
    /// False outside 0 < σ < 1, d >= 3, where the positive solution is not
    /// known to be unique.
    pub uniqueness_guaranteed: bool,
}

impl GroundStateResult {
    pub(crate) fn assemble(
        phi: RadialField,
        p: &ModelParams,
        omega: f64,
        iterations: usize,
        solver: Solver,
    ) -> Result<Self> {
        let report = functionals(&phi, p, omega)?;
        let pohozaev_residuals = pohozaev_from_report(&report, p);
        Ok(GroundStateResult {
            phi,
            omega,
            action_d: report.action_S,
            report,
            pohozaev_residuals,
            iterations,
            solver,
            uniqueness_guaranteed: uniqueness_regime(p),
        })
    }

    /// |K_ω(φ)| relative to the largest constituent term.
    pub fn nehari_residual(&self) -> f64 {
        self.report.nehari_K.abs() / self.report.scale()
    }

    /// |Q(φ)| relative to the largest constituent term.
    pub fn virial_residual(&self) -> f64 {
        self.report.virial_Q.abs() / self.report.scale()
    }

    /// |S_ω(φ) - α/(2(α+2)) ||φ||^{α+2}| relative to S_ω(φ).
    pub fn action_identity_residual(&self, p: &ModelParams) -> f64 {
        let a = p.alpha();
        let rhs = a / (2.0 * (a + 2.0)) * self.report.power_Lp;
        (self.action_d - rhs).abs() / self.action_d.abs()
    }
}

pub(crate) fn uniqueness_regime(p: &ModelParams) -> bool {
    p.d() >= 3 && p.sigma() < 1.0
}

#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct ConstrainedMinResult {
    pub v: RadialField,
    pub a: f64,
    pub I_a: f64,
    pub lagrange_omega: f64,
    pub report: FunctionalReport,
    pub flow_steps: usize,
    /// ||EL(v) + ω v|| / (|||v|^α v|| + |ω| ||v||).
    pub el_residual: f64,
    /// Energy after every accepted step.
    pub energy_history: Vec<f64>,
}

fn pohozaev_from_report(r: &FunctionalReport, p: &ModelParams) -> (f64, f64) {
    let d = p.d() as f64;
    let a2 = p.alpha() + 2.0;
    let t1 = [r.kinetic, r.omega * r.mass, -r.potential_G, -r.power_Lp];
    let t2 = [
        (2.0 - d) / 2.0 * r.kinetic,
        -d * r.omega / 2.0 * r.mass,
        (d - p.sigma()) / 2.0 * r.potential_G,
        d / a2 * r.power_Lp,
    ];
    let rel = |t: &[f64; 4]| {
        let s: f64 = t.iter().sum();
        let m = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if m == 0.0 {
            0.0
        } else {
            s.abs() / m
        }
    };
    (rel(&t1), rel(&t2))
}

/// Residuals of the two Pohozaev identities, each normalised by its largest
/// constituent term.
pub fn pohozaev_residuals(v: &RadialField, p: &ModelParams, omega: f64) -> Result<(f64, f64)> {
    if v.is_zero() {
        return Err(param("v", "Pohozaev residuals need a nonzero field"));
    }
    let r = functionals(v, p, omega)?;
    Ok(pohozaev_from_report(&r, p))
}

/// Errors unless ω lies above the bottom of the discrete spectrum, -μ₁.
pub(crate) fn check_frequency(p: &ModelParams, g: &RadialGrid, omega: f64) -> Result<()> {
    let (diag, off) = crate::spectral::symmetric_operator(p, g);
    if crate::linalg::count_below(&diag, &off, -omega) > 0 {
        return Err(crate::error::Error::BelowThreshold {
            omega,
            msg: "-omega lies above the bottom of the spectrum of -Δ - c|x|^{-σ}".into(),
        });
    }
    Ok(())
}
