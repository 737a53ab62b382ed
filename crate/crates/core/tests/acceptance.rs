//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines show up under `cargo test`. A FAIL is
//! reported, not raised; the process only exits non-zero when a check
//! panics. Set NLSP_ACCEPT=1,5,8 to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use nlsp::critical::{
    energy_scaling_sweep, gn_sharpness_check, gn_test_family, gradient_divergence_check, CriticalSweep, SweepOptions,
    SWEEP_FRACTIONS,
};
use nlsp::dynamics::{
    detect_blowup, evolve, random_perturbation, stability_experiment, virial_check, BlowupVerdict, EvolveOptions,
    RunEnd, StabilityOptions,
};
use nlsp::elliptic::{find_ground_state_shooting, minimize_action, solve_free_soliton, GroundStateResult, Resolution};
use nlsp::functionals::{functionals, h1_distance, rescale};
use nlsp::spectral::ground_eigenpair;
use nlsp::thresholds::{classify, find_omega0, monotone_lemma_check, sample_family, search_kplus, Membership};
use nlsp::uniqueness::{check_conditions, two_seed_corroboration};
use nlsp::{build_grid, ModelParams, RadialField};

type Check = Result<(bool, String), nlsp::Error>;

const HYDROGEN_TOL: f64 = 1e-3;
const A_STAR_TOL: f64 = 1e-4;
const RESIDUAL_TOL: f64 = 1e-6;
const CROSS_SOLVER_TOL: f64 = 1e-4;
const GN_TOL: f64 = 1e-6;
const SLOPE_TOL: f64 = 0.05;
const LIMIT_TOL: f64 = 0.02;
const SWEEP_BUDGET_S: f64 = 600.0;
const H1_BAND: f64 = 1.2;
const H1_CLOSEST_TOL: f64 = 0.05;
const GRAD_SLOPE_TOL: f64 = 0.1;
const VIRIAL_TOL: f64 = 1e-2;
const VIRIAL_RATIO: f64 = 3.5;
const DICHOTOMY_T: f64 = 10.0;
const DICHOTOMY_BUDGET_S: f64 = 300.0;
const MASS_DRIFT_TOL: f64 = 1e-10;
const ENERGY_DRIFT_TOL: f64 = 1e-6;
const LEMMA_TOL: f64 = 1e-12;
const TWO_SEED_TOL: f64 = 1e-6;
const STABILITY_DELTA: f64 = 1e-2;
const STABILITY_TOL: f64 = 1e-1;

fn gaussian(g: &Arc<nlsp::RadialGrid>, amp: f64, s: f64) -> RadialField {
    RadialField::from_real_fn(g.clone(), |r| amp * (-(r / s).powi(2) / 2.0).exp()).unwrap()
}

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

fn c1() -> Check {
    // -Φ'' - (2/r)Φ' - Φ/r = μΦ has Φ = e^{-r/2}, μ = -1/4.
    let t = Instant::now();
    let p = ModelParams::new(3, 1.0, 1.0)?;
    let mu = |n: usize| -> Result<f64, nlsp::Error> { Ok(ground_eigenpair(&p, Arc::new(build_grid(3, 60.0, n)?))?.mu1) };
    let (coarse, fine) = (mu(8192)?, mu(16384)?);
    let secs = t.elapsed().as_secs_f64();
    let err = (fine + 0.25).abs();
    let converged = (fine + 0.25).abs() <= (coarse + 0.25).abs();
    Ok((
        err <= HYDROGEN_TOL && converged && secs < 10.0,
        format!("mu1 = {fine:.8} (n/2: {coarse:.8}), error {err:.2e}, {secs:.1}s"),
    ))
}

fn c2() -> Check {
    let t = Instant::now();
    let s = solve_free_soliton(1, &Resolution::for_omega(1.0))?;
    let exact = 3f64.sqrt() * std::f64::consts::PI / 2.0;
    let err = (s.a_star - exact).abs();
    let secs = t.elapsed().as_secs_f64();
    Ok((err <= A_STAR_TOL && secs < 10.0, format!("a* = {:.8}, error {err:.2e}, {secs:.1}s", s.a_star)))
}

fn worst_residual(gs: &GroundStateResult, p: &ModelParams) -> f64 {
    [
        gs.nehari_residual(),
        gs.virial_residual(),
        gs.pohozaev_residuals.0,
        gs.pohozaev_residuals.1,
        gs.action_identity_residual(p),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn c3() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(d, s, a, om) in &[(3usize, 0.5, 1.0, 1.0), (3, 0.5, 2.0, 1.0), (2, 0.5, 1.0, 1.0), (1, 0.5, 2.0, 2.0)] {
        let p = ModelParams::new(d, s, a)?;
        let res = Resolution::for_omega(om);
        let sh = find_ground_state_shooting(&p, om, &res)?;
        let de = minimize_action(&p, om, &res)?;
        let worst = worst_residual(&sh, &p).max(worst_residual(&de, &p));
        let dist = h1_distance(&sh.phi, &de.phi)?;
        ok &= worst <= RESIDUAL_TOL && dist <= CROSS_SOLVER_TOL;
        parts.push(format!("({d},{s},{a}) res {worst:.1e} H1 {dist:.1e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn c4() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [1usize, 2, 3] {
        let s = solve_free_soliton(d, &Resolution::for_omega(1.0))?;
        let fam = gn_test_family(&s.q.grid)?;
        let rep = gn_sharpness_check(&s.q, &fam);
        ok &= rep.equality_at_q <= GN_TOL && rep.strict_on_family && rep.family_size == 50;
        parts.push(format!("d={d} eq {:.1e} strict {}/{}", rep.equality_at_q, rep.strict_on_family, rep.family_size));
    }
    Ok((ok, parts.join("; ")))
}

fn sweep(d: usize, sigma: f64) -> Result<(CriticalSweep, f64), nlsp::Error> {
    let t = Instant::now();
    let sol = solve_free_soliton(d, &Resolution::for_omega(1.0))?;
    let p = ModelParams::mass_critical(d, sigma)?;
    let a_list: Vec<f64> = SWEEP_FRACTIONS.iter().map(|f| f * sol.a_star).collect();
    let sw = energy_scaling_sweep(&p, &a_list, &sol, &SweepOptions::default())?;
    Ok((sw, t.elapsed().as_secs_f64()))
}

fn c5(sweeps: &[(CriticalSweep, f64)]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (sw, secs) in sweeps {
        let se = rel(sw.slope, sw.expected_slope);
        let le = rel(sw.limit_estimate, sw.lambda0.limit_value);
        ok &= se <= SLOPE_TOL && le <= LIMIT_TOL && *secs < SWEEP_BUDGET_S;
        parts.push(format!(
            "(d={},s={}) slope {:.5} vs {:.5}, limit err {le:.1e}, {secs:.0}s",
            sw.d, sw.sigma, sw.slope, sw.expected_slope
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c6(sweeps: &[(CriticalSweep, f64)]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (sw, _) in sweeps {
        let h1: Vec<f64> = sw.records.iter().map(|r| r.h1_error).collect();
        let monotone = h1.windows(2).all(|w| w[1] <= H1_BAND * w[0]);
        let last = *h1.last().unwrap();
        let gd = gradient_divergence_check(sw);
        let ge = rel(gd.slope, gd.expected_slope);
        ok &= monotone && last <= H1_CLOSEST_TOL && gd.increasing && ge <= GRAD_SLOPE_TOL;
        parts.push(format!(
            "(d={},s={}) h1 monotone {monotone}, h1 at 0.999 {last:.2e}, grad slope {:.4} vs {:.4}",
            sw.d, sw.sigma, gd.slope, gd.expected_slope
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c7() -> Check {
    let p = ModelParams::new(3, 0.5, 1.0)?;
    let g = Arc::new(build_grid(3, 30.0, 4096)?);
    let u0 = gaussian(&g, 1.5, 1.0);
    let run = |dt: f64| -> Result<f64, nlsp::Error> {
        let opts = EvolveOptions { out_every: 1, adaptive: false, ..EvolveOptions::default() };
        virial_check(&evolve(&u0, &p, dt, 1.0, &opts)?)
    };
    let (coarse, fine) = (run(2e-2)?, run(1e-2)?);
    let ratio = coarse / fine;
    Ok((
        coarse <= VIRIAL_TOL && ratio >= VIRIAL_RATIO,
        format!("mismatch {coarse:.2e} at dt=0.02, {fine:.2e} at dt=0.01, ratio {ratio:.2}"),
    ))
}

fn c8() -> Check {
    let p = ModelParams::new(3, 0.5, 2.0)?;
    let t0 = find_omega0(&p, (0.45, 20.0), 1e-4)?;
    let om = 1.0;
    let mut parts = vec![format!("omega0 = {:.4}, omega = {om}", t0.omega0)];
    if om < t0.omega0 {
        return Ok((false, parts.join("; ")));
    }
    let res = Resolution { n: 8192, r_max: 30.0 };
    let gs = find_ground_state_shooting(&p, om, &res)?;

    let t = Instant::now();
    let v = rescale(&gs.phi, 1.2)?.scaled(0.99);
    let m = classify(&v, &p, om, &gs)?;
    let tr = evolve(&v, &p, 1e-3, DICHOTOMY_T, &EvolveOptions::default())?;
    let verdict = detect_blowup(&tr, &functionals(&v, &p, om)?);
    let secs = t.elapsed().as_secs_f64();
    let kminus = m.verdict == Membership::Kminus
        && tr.variance_t[0].is_finite()
        && matches!(verdict, BlowupVerdict::BlewUp { t_star } if t_star < DICHOTOMY_T)
        && secs < DICHOTOMY_BUDGET_S;
    parts.push(format!("K- datum {:?} -> {verdict:?} ({secs:.0}s)", m.verdict));

    let t = Instant::now();
    let search = search_kplus(&p, om, &gs)?;
    let kplus = match &search.found {
        None => {
            parts.push(format!(
                "no K+ datum among {} candidates (best score {:.2e})",
                search.evaluated,
                search.best.first().map_or(f64::NAN, |c| c.score)
            ));
            false
        }
        Some(w) => {
            let tr = evolve(w, &p, 1e-3, DICHOTOMY_T, &EvolveOptions::default())?;
            let verdict = detect_blowup(&tr, &functionals(w, &p, om)?);
            let secs = t.elapsed().as_secs_f64();
            parts.push(format!("K+ datum -> {:?}, {verdict:?} ({secs:.0}s)", tr.end));
            tr.end == RunEnd::Completed && verdict == BlowupVerdict::Global && secs < DICHOTOMY_BUDGET_S
        }
    };
    Ok((kminus && kplus, parts.join("; ")))
}

fn c9() -> Check {
    let p = ModelParams::new(2, 0.5, 1.0)?;
    let g = Arc::new(build_grid(2, 40.0, 8192)?);
    let u0 = gaussian(&g, 1.0, 1.5).add(&random_perturbation(&g, 0.2, 11))?;
    let tr = evolve(&u0, &p, 1e-3, 5.0, &EvolveOptions::default())?;
    let (m0, e0) = (tr.mass_t[0], tr.energy_t[0]);
    let t_end = *tr.times.last().unwrap();
    let dm = tr.mass_t.iter().fold(0.0f64, |m, x| m.max((x - m0).abs())) / m0 / t_end;
    let de = tr.energy_t.iter().fold(0.0f64, |m, x| m.max((x - e0).abs())) / e0.abs() / t_end;
    Ok((
        tr.end == RunEnd::Completed && dm <= MASS_DRIFT_TOL && de <= ENERGY_DRIFT_TOL,
        format!("mass drift {dm:.1e}/t, energy drift {de:.1e}/t over t = {t_end}"),
    ))
}

fn c10() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(s, b) in &[(0.5, 3.0), (1.0, 3.0), (1.5, 4.0)] {
        let m = monotone_lemma_check(s, b, 10_000)?;
        ok &= m.g2_min >= -LEMMA_TOL && m.g1_max <= LEMMA_TOL;
        parts.push(format!("({s},{b}) min g2 {:.1e} max g1 {:.1e}", m.g2_min, m.g1_max));
    }
    Ok((ok, parts.join("; ")))
}

fn c11() -> Check {
    let p = ModelParams::new(3, 0.5, 1.0)?.with_coupling(1.0)?;
    let rep = check_conditions(&p, 1.0)?;
    let c = two_seed_corroboration(&p, 1.0, &Resolution { n: 1 << 13, r_max: 30.0 })?;
    let unique = rep.sign_changes.len() == 1 && rep.r1.is_some();
    Ok((
        rep.all_hold && unique && c.h1_distance <= TWO_SEED_TOL,
        format!(
            "{}/6 conditions, r1 = {:.4}, two-seed H1 {:.1e}",
            rep.conditions.iter().filter(|c| c.holds).count(),
            rep.r1.unwrap_or(f64::NAN),
            c.h1_distance
        ),
    ))
}

fn c12() -> Check {
    let p = ModelParams::new(2, 0.5, 1.0)?;
    let rep = stability_experiment(&p, 2.0, STABILITY_DELTA, 20.0, 5, &StabilityOptions::default())?;
    Ok((
        rep.max_distance <= STABILITY_TOL,
        format!("max orbit distance {:.3e} over {} trials", rep.max_distance, rep.trials.len()),
    ))
}

fn c13() -> Check {
    let p = ModelParams::new(3, 0.5, 2.0)?;
    let gs = find_ground_state_shooting(&p, 1.0, &Resolution { n: 8192, r_max: 30.0 })?;
    let fam = sample_family(&gs, 100)?;
    let mut agree = 0;
    let mut kminus = 0;
    for v in &fam {
        let m = classify(v, &p, 1.0, &gs)?;
        agree += usize::from((m.verdict == Membership::Kminus) == m.b_omega());
        kminus += usize::from(m.verdict == Membership::Kminus);
    }
    Ok((agree == fam.len(), format!("{agree}/{} agree ({kminus} in K-)", fam.len())))
}

fn report(k: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let secs = t.elapsed().as_secs_f64();
    let (pass, detail, panicked) = match outcome {
        Ok(Ok((pass, detail))) => (pass, detail, false),
        Ok(Err(e)) => (false, format!("error: {e}"), false),
        Err(_) => (false, "panicked".to_string(), true),
    };
    println!("criterion {k:>2} {}: {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
    !panicked
}

fn main() {
    let wanted: Option<Vec<usize>> =
        std::env::var("NLSP_ACCEPT").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let on = |k: usize| wanted.as_ref().map_or(true, |w| w.contains(&k));
    let mut clean = true;
    let mut run = |k: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if on(k) {
            clean &= report(k, name, f);
        }
    };
    run(1, "hydrogen-like eigenvalue", &mut c1);
    run(2, "1D critical mass", &mut c2);
    run(3, "ground-state identities and solver agreement", &mut c3);
    run(4, "GN sharpness", &mut c4);
    let sweeps = if on(5) || on(6) {
        let s: Result<Vec<_>, _> = [(2usize, 0.5), (3, 1.0)].iter().map(|&(d, s)| sweep(d, s)).collect();
        Some(s)
    } else {
        None
    };
    let mut with_sweeps = |k: usize, name: &str, f: fn(&[(CriticalSweep, f64)]) -> Check| match &sweeps {
        Some(Ok(s)) => run(k, name, &mut || f(s)),
        Some(Err(e)) => {
            let msg = e.to_string();
            run(k, name, &mut || Ok((false, format!("sweep failed: {msg}"))))
        }
        None => {}
    };
    with_sweeps(5, "energy scaling law", c5);
    with_sweeps(6, "rescaled convergence", c6);
    run(7, "virial identity", &mut c7);
    run(8, "dichotomy", &mut c8);
    run(9, "conservation", &mut c9);
    run(10, "monotone auxiliary functions", &mut c10);
    run(11, "uniqueness conditions", &mut c11);
    run(12, "orbital stability", &mut c12);
    run(13, "K- and B_omega agree", &mut c13);
    if !clean {
        std::process::exit(1);
    }
}
