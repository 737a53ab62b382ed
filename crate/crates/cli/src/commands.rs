//! One runner per command. Each writes its tables and profiles into the run
//! directory and returns the verdicts it asserts plus a JSON block for the
//! summary.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use nlsp::critical::{
    energy_scaling_sweep, fit_scaling_constant, gradient_divergence_check, rescaled_pair, trial_energy, trial_grid, SweepOptions,
};
use nlsp::dynamics::{evolve, random_perturbation, stability_experiment, virial_check, BlowupVerdict, EvolveOptions, RunEnd, StabilityOptions};
use nlsp::elliptic::{
    find_ground_state_shooting, minimize_action, minimize_energy_constrained, solve_free_soliton, FlowOptions, GroundStateResult, Resolution,
};
use nlsp::functionals::{h1_distance, rescale};
use nlsp::profile::Profile;
use nlsp::spectral::ground_eigenpair;
use nlsp::thresholds::{classify, sample_family, Membership};
use nlsp::uniqueness::{check_conditions, two_seed_corroboration};
use nlsp::{ModelParams, RadialField};

use crate::config::{ExperimentConfig, Expect, Init, Knobs, SolverChoice};
use crate::output::OutDir;
use crate::plot::{emit_plot_script, Fit, PlotKind};
use crate::row;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn verdict(name: &str, pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

/// Tolerance below which a value passes; the detail records both numbers.
fn at_most(name: &str, value: f64, tol: f64) -> Verdict {
    verdict(name, value <= tol, format!("{value:.6e} <= {tol:.1e}"))
}

#[derive(Debug)]
pub enum RunError {
    Model { module: &'static str, source: nlsp::Error },
    Io(std::io::Error),
    Input(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Model { module, source } => write!(f, "{module}: {source}"),
            RunError::Io(e) => write!(f, "i/o: {e}"),
            RunError::Input(m) => write!(f, "input: {m}"),
        }
    }
}

impl RunError {
    /// Preconditions the parser cannot see (ω ≤ -μ₁, a ≥ a*, bad input
    /// files) count as configuration errors.
    pub fn is_config(&self) -> bool {
        match self {
            RunError::Model { source, .. } => matches!(
                source,
                nlsp::Error::Param { .. }
                    | nlsp::Error::BelowThreshold { .. }
                    | nlsp::Error::SupercriticalMass { .. }
                    | nlsp::Error::UnboundedBelow { .. }
                    | nlsp::Error::Parse { .. }
                    | nlsp::Error::GridMismatch(_)
            ),
            RunError::Io(_) => false,
            RunError::Input(_) => true,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<crate::plot::PlotError> for RunError {
    fn from(e: crate::plot::PlotError) -> Self {
        RunError::Io(std::io::Error::other(e.to_string()))
    }
}

trait Ctx<T> {
    fn ctx(self, module: &'static str) -> Result<T, RunError>;
}

impl<T> Ctx<T> for nlsp::Result<T> {
    fn ctx(self, module: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Model { module, source })
    }
}

pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub results: Value,
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, RunError> {
    let p = &cfg.params;
    match &cfg.knobs {
        Knobs::Eig => eig(cfg, p, out),
        Knobs::GroundState { omega, solver } => groundstate(cfg, p, *omega, *solver, out),
        Knobs::Minimize { a, max_steps } => minimize(cfg, p, *a, *max_steps, out),
        Knobs::Classify { omega, profiles, family_size } => classify_fields(cfg, p, *omega, profiles, *family_size, out),
        Knobs::Evolve { .. } => evolve_run(cfg, p, out),
        Knobs::CriticalSweep { .. } => sweep(cfg, p, out),
        Knobs::UniquenessCheck { omega, corroborate } => uniqueness(cfg, p, *omega, *corroborate, out),
        Knobs::Stability { .. } => stability(cfg, p, out),
    }
}

fn eig(cfg: &ExperimentConfig, p: &ModelParams, out: &mut OutDir) -> Result<Outcome, RunError> {
    let g = cfg.res.grid(p.d()).ctx("core")?;
    let pair = ground_eigenpair(p, g).ctx("spectral")?;
    out.profile("eig.profile", p, &cfg.tag, &pair.phi)?;
    out.csv(
        "eig.csv",
        &["d", "sigma", "coupling", "n", "mu1", "residual"],
        &[row![p.d(), p.sigma(), p.coupling(), cfg.res.n, pair.mu1, pair.residual]],
    )?;
    Ok(Outcome {
        verdicts: vec![at_most("eigen_residual", pair.residual, 1e-6)],
        results: json!({ "mu1": pair.mu1, "residual": pair.residual, "iterations": pair.iterations }),
    })
}

fn gs_row(kind: &str, p: &ModelParams, gs: &GroundStateResult) -> Vec<crate::output::Cell> {
    row![
        kind,
        p.d(),
        p.sigma(),
        p.alpha(),
        gs.omega,
        gs.action_d,
        gs.pohozaev_residuals.0,
        gs.pohozaev_residuals.1,
        gs.nehari_residual(),
        gs.virial_residual(),
        gs.iterations
    ]
}

const GS_HEADER: &[&str] = &["kind", "d", "sigma", "alpha", "omega", "d_omega", "pohozaev_1", "pohozaev_2", "nehari", "virial", "iterations"];

fn gs_json(gs: &GroundStateResult) -> Value {
    json!({
        "d_omega": gs.action_d,
        "pohozaev_residuals": [gs.pohozaev_residuals.0, gs.pohozaev_residuals.1],
        "nehari_residual": gs.nehari_residual(),
        "virial_residual": gs.virial_residual(),
        "iterations": gs.iterations,
        "phi0": gs.phi.values[0].re,
        "report": gs.report,
        "uniqueness_guaranteed": gs.uniqueness_guaranteed,
    })
}

fn groundstate(cfg: &ExperimentConfig, p: &ModelParams, omega: f64, solver: SolverChoice, out: &mut OutDir) -> Result<Outcome, RunError> {
    let mut solved: Vec<(&str, GroundStateResult)> = Vec::new();
    if matches!(solver, SolverChoice::Shooting | SolverChoice::Both) {
        solved.push(("shooting", find_ground_state_shooting(p, omega, &cfg.res).ctx("elliptic")?));
    }
    if matches!(solver, SolverChoice::Descent | SolverChoice::Both) {
        solved.push(("descent", minimize_action(p, omega, &cfg.res).ctx("elliptic")?));
    }
    let mut verdicts = Vec::new();
    let mut rows = Vec::new();
    let mut results = serde_json::Map::new();
    for (kind, gs) in &solved {
        out.profile(&format!("groundstate_{kind}.profile"), p, &cfg.tag, &gs.phi)?;
        rows.push(gs_row(kind, p, gs));
        verdicts.push(at_most(&format!("{kind}_pohozaev_1"), gs.pohozaev_residuals.0, 1e-6));
        verdicts.push(at_most(&format!("{kind}_pohozaev_2"), gs.pohozaev_residuals.1, 1e-6));
        verdicts.push(at_most(&format!("{kind}_nehari"), gs.nehari_residual(), 1e-6));
        verdicts.push(at_most(&format!("{kind}_virial"), gs.virial_residual(), 1e-6));
        results.insert(kind.to_string(), gs_json(gs));
    }
    if let [(_, a), (_, b)] = solved.as_slice() {
        let dist = h1_distance(&a.phi, &b.phi).ctx("core")?;
        verdicts.push(at_most("cross_solver_h1", dist, 1e-4));
        results.insert("cross_solver_h1".into(), json!(dist));
    }
    out.csv("groundstate.csv", GS_HEADER, &rows)?;
    Ok(Outcome {
        verdicts,
        results: Value::Object(results),
    })
}

fn flow_options(cfg: &ExperimentConfig, max_steps: usize) -> FlowOptions {
    FlowOptions {
        res: cfg.res,
        max_steps,
        ..FlowOptions::default()
    }
}

fn minimize(cfg: &ExperimentConfig, p: &ModelParams, a: f64, max_steps: usize, out: &mut OutDir) -> Result<Outcome, RunError> {
    let opts = flow_options(cfg, max_steps);
    let m = minimize_energy_constrained(p, a, &opts).ctx("elliptic")?;
    out.profile("minimize.profile", p, &cfg.tag, &m.v)?;
    out.csv(
        "minimize.csv",
        &["kind", "d", "sigma", "alpha", "a", "I_a", "lagrange_omega", "el_residual", "flow_steps"],
        &[row!["minimize", p.d(), p.sigma(), p.alpha(), a, m.I_a, m.lagrange_omega, m.el_residual, m.flow_steps]],
    )?;
    Ok(Outcome {
        verdicts: vec![at_most("el_residual", m.el_residual, opts.residual_tol)],
        results: json!({
            "I_a": m.I_a,
            "lagrange_omega": m.lagrange_omega,
            "el_residual": m.el_residual,
            "flow_steps": m.flow_steps,
            "report": m.report,
        }),
    })
}

/// Loads a profile, checks its dimension and moves it onto `grid`.
fn load_onto(path: &std::path::Path, p: &ModelParams, grid: &Arc<nlsp::RadialGrid>) -> Result<RadialField, RunError> {
    let prof = Profile::load(path).ctx("core")?;
    if prof.field.grid.d != p.d() {
        return Err(RunError::Input(format!("{} lives in d = {}, the model has d = {}", path.display(), prof.field.grid.d, p.d())));
    }
    if *prof.field.grid == **grid {
        return Ok(prof.field);
    }
    Ok(prof.field.resample(grid.clone(), |r| r))
}

fn membership(m: Membership) -> &'static str {
    match m {
        Membership::Kminus => "Kminus",
        Membership::Kplus => "Kplus",
        Membership::Neither => "neither",
    }
}

fn classify_fields(
    cfg: &ExperimentConfig,
    p: &ModelParams,
    omega: f64,
    profiles: &[std::path::PathBuf],
    family_size: usize,
    out: &mut OutDir,
) -> Result<Outcome, RunError> {
    let gs = find_ground_state_shooting(p, omega, &cfg.res).ctx("elliptic")?;
    let fields: Vec<(String, RadialField)> = if profiles.is_empty() {
        sample_family(&gs, family_size)
            .ctx("thresholds")?
            .into_iter()
            .enumerate()
            .map(|(k, v)| (format!("family[{k}]"), v))
            .collect()
    } else {
        profiles
            .iter()
            .map(|path| Ok((path.display().to_string(), load_onto(path, p, &gs.phi.grid)?)))
            .collect::<Result<_, RunError>>()?
    };
    let mut rows = Vec::with_capacity(fields.len());
    let mut agree = 0usize;
    let mut counts = [0usize; 3];
    for (k, (source, v)) in fields.iter().enumerate() {
        let m = classify(v, p, omega, &gs).ctx("thresholds")?;
        let r = &m.report;
        let kminus = m.verdict == Membership::Kminus;
        agree += usize::from(kminus == m.b_omega());
        counts[match m.verdict {
            Membership::Kminus => 0,
            Membership::Kplus => 1,
            Membership::Neither => 2,
        }] += 1;
        rows.push(row![
            k,
            source.as_str(),
            r.mass,
            r.kinetic,
            r.potential_G,
            r.power_Lp,
            r.energy_E,
            r.action_S,
            r.nehari_K,
            r.virial_Q,
            r.quadratic_H,
            m.margins.mass,
            m.margins.action,
            m.margins.nehari,
            m.margins.virial,
            m.margins.lp,
            m.boundary,
            membership(m.verdict),
            m.b_omega()
        ]);
    }
    out.csv(
        "classify.csv",
        &[
            "index", "source", "mass", "kinetic", "potential_G", "power_Lp", "energy_E", "action_S", "nehari_K", "virial_Q", "quadratic_H",
            "margin_mass", "margin_action", "margin_nehari", "margin_virial", "margin_lp", "boundary", "verdict", "b_omega",
        ],
        &rows,
    )?;
    out.profile("groundstate.profile", p, &cfg.tag, &gs.phi)?;
    let n = fields.len();
    Ok(Outcome {
        verdicts: vec![verdict("kminus_equals_b_omega", agree == n, format!("{agree}/{n} fields agree"))],
        results: json!({
            "fields": n,
            "kminus": counts[0],
            "kplus": counts[1],
            "neither": counts[2],
            "agreement": agree as f64 / n as f64,
            "ground_state": gs_json(&gs),
        }),
    })
}

fn run_end(e: RunEnd) -> &'static str {
    match e {
        RunEnd::Completed => "completed",
        RunEnd::GradientLimit => "gradient-limit",
        RunEnd::ResolutionLimit => "resolution-limit",
        RunEnd::NonFinite => "non-finite",
        RunEnd::BoundaryReached => "boundary-reached",
    }
}

fn evolve_run(cfg: &ExperimentConfig, p: &ModelParams, out: &mut OutDir) -> Result<Outcome, RunError> {
    let Knobs::Evolve {
        omega,
        init,
        perturbation,
        dt,
        t_end,
        out_every,
        adaptive,
        expect,
    } = &cfg.knobs
    else {
        unreachable!()
    };
    let grid = cfg.res.grid(p.d()).ctx("core")?;
    let mut u0 = match init {
        Init::Gaussian { amplitude, width } => RadialField::from_real_fn(grid.clone(), |r| amplitude * (-(r / width).powi(2) / 2.0).exp()).ctx("core")?,
        Init::GroundState { lambda, mu } => {
            let gs = find_ground_state_shooting(p, omega.expect("parser requires omega"), &cfg.res).ctx("elliptic")?;
            rescale(&gs.phi, *lambda).ctx("core")?.scaled(*mu)
        }
        Init::Profile(path) => load_onto(path, p, &grid)?,
    };
    if *perturbation > 0.0 {
        u0 = u0.add(&random_perturbation(&u0.grid, *perturbation, cfg.seed)).ctx("core")?;
    }
    let opts = EvolveOptions {
        out_every: *out_every,
        adaptive: *adaptive,
        ..EvolveOptions::default()
    };
    let tr = evolve(&u0, p, *dt, *t_end, &opts).ctx("dynamics")?;
    let rows: Vec<_> = (0..tr.times.len())
        .map(|k| row![tr.times[k], tr.mass_t[k], tr.energy_t[k], tr.variance_t[k], tr.virial_q_t[k], tr.gradnorm_t[k]])
        .collect();
    let table = out.csv("trace.csv", &["t", "mass", "energy", "variance", "virialQ", "gradnorm"], &rows)?;
    if cfg.plots {
        emit_plot_script(&table, PlotKind::Virial, None)?;
        out.written.push("trace_virial.py".into());
    }
    if let Some(f) = &tr.final_state {
        out.profile("final.profile", p, &cfg.tag, f)?;
    }
    // Drifts over the samples taken before the run stopped early.
    let n = tr.times.len() - usize::from(tr.end != RunEnd::Completed && tr.times.len() > 1);
    let t_last = tr.times[n - 1].max(f64::MIN_POSITIVE);
    let (m0, e0) = (tr.mass_t[0], tr.energy_t[0]);
    let dm = tr.mass_t[..n].iter().fold(0.0f64, |m, x| m.max((x - m0).abs())) / m0 / t_last;
    let de = tr.energy_t[..n].iter().fold(0.0f64, |m, x| m.max((x - e0).abs())) / e0.abs().max(f64::MIN_POSITIVE) / t_last;
    let virial = virial_check(&tr).ok();
    let mut verdicts = Vec::new();
    if tr.end == RunEnd::Completed {
        verdicts.push(at_most("mass_drift_per_time", dm, 1e-10));
        verdicts.push(at_most("energy_drift_per_time", de, 1e-6));
    }
    let (v_name, t_star) = match tr.verdict {
        BlowupVerdict::Global => ("global", None),
        BlowupVerdict::BlewUp { t_star } => ("blow-up", Some(t_star)),
        BlowupVerdict::Inconclusive => ("inconclusive", None),
    };
    match expect {
        Expect::BlowUp => verdicts.push(verdict("expected_blowup", t_star.is_some(), format!("detector says {v_name}"))),
        Expect::Global => verdicts.push(verdict("expected_global", tr.verdict == BlowupVerdict::Global, format!("detector says {v_name}"))),
        Expect::Nothing => {}
    }
    Ok(Outcome {
        verdicts,
        results: json!({
            "end": run_end(tr.end),
            "blowup_verdict": v_name,
            "t_star": t_star,
            "t_reached": tr.times[tr.times.len() - 1],
            "mass_drift_per_time": dm,
            "energy_drift_per_time": de,
            "virial_mismatch": virial,
            "dt_min": tr.dt_min,
            "samples": tr.times.len(),
        }),
    })
}

fn sweep(cfg: &ExperimentConfig, p: &ModelParams, out: &mut OutDir) -> Result<Outcome, RunError> {
    let Knobs::CriticalSweep {
        fractions,
        sweep_n,
        extent,
        tau,
        max_steps,
    } = &cfg.knobs
    else {
        unreachable!()
    };
    let d = p.d();
    let s = p.sigma();
    let sol = solve_free_soliton(d, &Resolution::for_omega(1.0)).ctx("elliptic")?;
    let mut fr = fractions.clone();
    fr.sort_by(f64::total_cmp);
    let a_list: Vec<f64> = fr.iter().map(|f| f * sol.a_star).collect();
    let opts = SweepOptions {
        n: *sweep_n,
        extent: *extent,
        max_steps: *max_steps,
    };
    let sw = energy_scaling_sweep(p, &a_list, &sol, &opts).ctx("critical")?;
    let rows: Vec<_> = sw
        .records
        .iter()
        .map(|r| row![r.a, r.beta_a, r.I_a, r.G_va, r.kinetic_va, r.h1_error, r.gradnorm, r.lagrange_omega, r.flow_steps, r.el_residual])
        .collect();
    let table = out.csv(
        "sweep.csv",
        &["a", "beta_a", "I_a", "G_va", "kinetic_va", "h1_error", "gradnorm", "lagrange_omega", "flow_steps", "el_residual"],
        &rows,
    )?;

    // Trial energies with the cut-off soliton; τ values the grid cannot
    // resolve are listed as skipped.
    let tg = trial_grid(d, *sweep_n).ctx("critical")?;
    let mut trial_rows = Vec::new();
    let mut skipped = Vec::new();
    for &a in &a_list {
        for &t in tau {
            match trial_energy(a, t, &sol.q, p, &tg) {
                Ok(te) => trial_rows.push(row![a, t, te.energy_per_mass, te.expansion, te.mass]),
                Err(nlsp::Error::Resolution(_)) => skipped.push(json!({ "a": a, "tau": t })),
                Err(e) => return Err(RunError::Model { module: "critical", source: e }),
            }
        }
    }
    out.csv("trial.csv", &["a", "tau", "energy_per_mass", "expansion", "mass"], &trial_rows)?;

    let last = sw.records.last().expect("at least two records");
    if let Some(v) = &sw.closest_minimiser {
        let (w, target) = rescaled_pair(v, last.a, sol.a_star, &sol.q, s, d).ctx("critical")?;
        let rows: Vec<_> = w
            .grid
            .r
            .iter()
            .zip(w.values.iter().zip(&target.values))
            .map(|(r, (a, b))| row![*r, a.re, b.re])
            .collect();
        let rt = out.csv("rescaled.csv", &["r", "w_a", "target"], &rows)?;
        if cfg.plots {
            emit_plot_script(&rt, PlotKind::Rescaled, None)?;
            out.written.push("rescaled_rescaled.py".into());
        }
    }
    if cfg.plots {
        let fit = Fit {
            slope: sw.slope,
            intercept: sw.intercept,
            expected_slope: sw.expected_slope,
        };
        emit_plot_script(&table, PlotKind::Sweep, Some(fit))?;
        out.written.push("sweep_sweep.py".into());
    }

    let slope_err = ((sw.slope - sw.expected_slope) / sw.expected_slope).abs();
    let limit_err = ((sw.limit_estimate - sw.lambda0.limit_value) / sw.lambda0.limit_value).abs();
    let h1: Vec<f64> = sw.records.iter().map(|r| r.h1_error).collect();
    let h1_monotone = h1.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    let gd = gradient_divergence_check(&sw);
    let k = fit_scaling_constant(&sw.records, s);
    let verdicts = vec![
        at_most("slope_relative_error", slope_err, 0.05),
        at_most("limit_relative_error", limit_err, 0.02),
        verdict("h1_error_decreasing", h1_monotone, h1.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")),
        at_most("h1_error_closest", last.h1_error, 0.05),
        verdict("gradient_diverges", gd.increasing, format!("growth factor {:.3}", gd.growth)),
        at_most("gradient_slope_relative_error", ((gd.slope - gd.expected_slope) / gd.expected_slope).abs(), 0.1),
    ];
    Ok(Outcome {
        verdicts,
        results: json!({
            "a_star": sol.a_star,
            "lambda0": sw.lambda0,
            "slope": sw.slope,
            "intercept": sw.intercept,
            "expected_slope": sw.expected_slope,
            "envelope": [sw.envelope.0, sw.envelope.1],
            "limit_estimate": sw.limit_estimate,
            "limit_value": sw.lambda0.limit_value,
            "gradient": gd,
            "scaling_constant": k,
            "trial_skipped": skipped,
        }),
    })
}

fn uniqueness(cfg: &ExperimentConfig, p: &ModelParams, omega: f64, corroborate: bool, out: &mut OutDir) -> Result<Outcome, RunError> {
    let rep = check_conditions(p, omega).ctx("uniqueness")?;
    let mut verdicts: Vec<Verdict> = rep
        .conditions
        .iter()
        .map(|c| verdict(&format!("condition_{}", c.label), c.holds, c.detail.clone()))
        .collect();
    let rows: Vec<_> = rep.conditions.iter().map(|c| row![c.label, c.holds, c.detail.clone()]).collect();
    out.csv("conditions.csv", &["condition", "holds", "detail"], &rows)?;
    let corr = if corroborate {
        let c = two_seed_corroboration(p, omega, &cfg.res).ctx("uniqueness")?;
        verdicts.push(at_most("two_seed_h1", c.h1_distance, 1e-6));
        Some(c)
    } else {
        None
    };
    Ok(Outcome {
        verdicts,
        results: json!({ "report": rep, "corroboration": corr }),
    })
}

fn stability(cfg: &ExperimentConfig, p: &ModelParams, out: &mut OutDir) -> Result<Outcome, RunError> {
    let Knobs::Stability {
        a,
        delta,
        t_end,
        trials,
        dt,
        out_every,
        tolerance,
        max_steps,
    } = &cfg.knobs
    else {
        unreachable!()
    };
    let opts = StabilityOptions {
        flow: flow_options(cfg, *max_steps),
        dt: *dt,
        evolve: EvolveOptions {
            out_every: *out_every,
            ..EvolveOptions::default()
        },
        seed: cfg.seed,
    };
    let rep = stability_experiment(p, *a, *delta, *t_end, *trials, &opts).ctx("dynamics")?;
    let rows: Vec<_> = rep
        .trials
        .iter()
        .flat_map(|t| t.distances.iter().map(move |&(time, dist)| row![t.seed, time, dist]))
        .collect();
    out.csv("stability.csv", &["seed", "t", "distance"], &rows)?;
    let per_trial: Vec<Value> = rep
        .trials
        .iter()
        .map(|t| json!({ "seed": t.seed, "max_distance": t.max_distance, "end": run_end(t.end) }))
        .collect();
    Ok(Outcome {
        verdicts: vec![at_most("max_orbit_distance", rep.max_distance, *tolerance)],
        results: json!({
            "a": rep.a,
            "I_a": rep.i_a,
            "lagrange_omega": rep.lagrange_omega,
            "delta": rep.delta,
            "t_end": rep.t_end,
            "max_distance": rep.max_distance,
            "trials": per_trial,
        }),
    })
}
