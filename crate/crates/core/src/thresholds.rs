//! Invariant sets K±_ω of the mass-supercritical problem, the second
//! variation D(ω) of the action along the mass-preserving scaling, the ω₀
//! search, the key estimate and the auxiliary functions behind it.

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{find_ground_state_shooting, GroundStateResult, Resolution};
use crate::error::{param, Error, Result};
use crate::field::RadialField;
use crate::functionals::{functionals, rescale, FunctionalReport};
use crate::params::ModelParams;

/// Margins closer to zero than this are treated as ties.
pub const BOUNDARY_BAND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Kminus,
    Kplus,
    Neither,
}

/// Signed margins, each positive when the defining inequality holds
/// strictly. Mass and action are relative to the ground state, K and Q are
/// relative to the largest term of v's report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Margins {
    pub mass: f64,
    pub action: f64,
    pub nehari: f64,
    pub virial: f64,
    /// (||v||_{α+2} - ||φ||_{α+2}) / ||φ||_{α+2}.
    pub lp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SetMembership {
    pub in_mass_ball: bool,
    pub below_action: bool,
    pub nehari_negative: bool,
    pub virial_sign: i8,
    pub verdict: Membership,
    pub margins: Margins,
    /// Some margin fell inside the boundary band.
    pub boundary: bool,
    pub report: FunctionalReport,
}

impl SetMembership {
    /// Same verdict with K_ω(v) < 0 replaced by ||v||_{α+2} > ||φ||_{α+2}.
    pub fn b_omega(&self) -> bool {
        self.in_mass_ball && self.below_action && self.margins.lp > BOUNDARY_BAND && self.virial_sign == -1
    }
}

fn strict(m: f64) -> bool {
    m > BOUNDARY_BAND
}

pub fn classify(v: &RadialField, p: &ModelParams, omega: f64, gs: &GroundStateResult) -> Result<SetMembership> {
    if v.is_zero() {
        return Err(param("v", "classification needs a nonzero field"));
    }
    let r = functionals(v, p, omega)?;
    let g = &gs.report;
    let scale = r.scale();
    let a2 = p.alpha() + 2.0;
    let margins = Margins {
        mass: (g.mass - r.mass) / g.mass,
        action: (gs.action_d - r.action_S) / gs.action_d.abs(),
        nehari: -r.nehari_K / scale,
        virial: r.virial_Q / scale,
        lp: (r.power_Lp.powf(1.0 / a2) - g.power_Lp.powf(1.0 / a2)) / g.power_Lp.powf(1.0 / a2),
    };
    // The mass ball is closed: ties count as inside.
    let in_mass_ball = margins.mass > -BOUNDARY_BAND;
    let below_action = strict(margins.action);
    let nehari_negative = strict(margins.nehari);
    let virial_sign = if margins.virial.abs() < BOUNDARY_BAND {
        0
    } else if margins.virial < 0.0 {
        -1
    } else {
        1
    };
    let boundary = [margins.mass, margins.action, margins.nehari, margins.virial, margins.lp]
        .iter()
        .any(|m| m.abs() < BOUNDARY_BAND);
    let verdict = if in_mass_ball && below_action && nehari_negative {
        match virial_sign {
            -1 => Membership::Kminus,
            1 => Membership::Kplus,
            _ => Membership::Neither,
        }
    } else {
        Membership::Neither
    };
    Ok(SetMembership {
        in_mass_ball,
        below_action,
        nehari_negative,
        virial_sign,
        verdict,
        margins,
        boundary,
        report: r,
    })
}

/// D(ω) = ||∇φ||² - σ(σ-1)/2 G(φ) - β(β-1)/(α+2) ||φ||^{α+2}, the second
/// derivative of λ ↦ S_ω(φ^λ) at λ = 1.
pub fn second_variation(gs: &GroundStateResult, p: &ModelParams) -> f64 {
    let r = &gs.report;
    let (s, b) = (p.sigma(), p.beta());
    r.kinetic - s * (s - 1.0) / 2.0 * r.potential_G - b * (b - 1.0) / (p.alpha() + 2.0) * r.power_Lp
}

/// Central second difference of λ ↦ S_ω(φ^λ) at λ = 1 with step `dl`,
/// the scaled profiles obtained by interpolation.
pub fn second_variation_fd(gs: &GroundStateResult, p: &ModelParams, dl: f64) -> Result<f64> {
    let s = |lam: f64| -> Result<f64> { Ok(functionals(&rescale(&gs.phi, lam)?, p, gs.omega)?.action_S) };
    Ok((s(1.0 + dl)? - 2.0 * gs.action_d + s(1.0 - dl)?) / (dl * dl))
}

/// D(ω) from a shooting ground state on a grid adapted to ω.
pub fn second_variation_at(p: &ModelParams, omega: f64) -> Result<f64> {
    let gs = find_ground_state_shooting(p, omega, &Resolution::for_omega(omega))?;
    Ok(second_variation(&gs, p))
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaThreshold {
    pub omega0: f64,
    /// D ≤ 0 already at the left end of the bracket.
    pub below_bracket: bool,
    pub d_at_omega0: f64,
    /// (ω, D(ω)) on the coarse log grid.
    pub scan: Vec<(f64, f64)>,
}

/// Smallest ω in `bracket` with D(ω) ≤ 0: a log-grid scan locates the first
/// sign change, bisection refines it to `rel_tol`.
pub fn find_omega0(p: &ModelParams, bracket: (f64, f64), rel_tol: f64) -> Result<OmegaThreshold> {
    find_omega0_with(bracket, rel_tol, &|om| second_variation_at(p, om))
}

pub fn find_omega0_with(
    bracket: (f64, f64),
    rel_tol: f64,
    d_of: &dyn Fn(f64) -> Result<f64>,
) -> Result<OmegaThreshold> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(param("bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let decades = (hi / lo).log10();
    let m = ((decades * 8.0).ceil() as usize).max(2);
    let mut scan = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let om = lo * (hi / lo).powf(k as f64 / m as f64);
        let d = d_of(om)?;
        scan.push((om, d));
        if d <= 0.0 {
            break;
        }
    }
    let &(om_first, d_first) = scan.last().unwrap();
    if d_first > 0.0 {
        return Err(Error::NotFound(format!(
            "D(omega) > 0 on the whole bracket: {}",
            scan.iter().map(|(o, d)| format!("D({o:.4e})={d:.4e}")).collect::<Vec<_>>().join(", ")
        )));
    }
    if scan.len() == 1 {
        return Ok(OmegaThreshold {
            omega0: lo,
            below_bracket: true,
            d_at_omega0: d_first,
            scan,
        });
    }
    let (mut a, mut b, mut db) = (scan[scan.len() - 2].0, om_first, d_first);
    while (b - a) > rel_tol * b {
        let mid = (a * b).sqrt();
        let dm = d_of(mid)?;
        if dm <= 0.0 {
            b = mid;
            db = dm;
        } else {
            a = mid;
        }
    }
    Ok(OmegaThreshold {
        omega0: b,
        below_bracket: false,
        d_at_omega0: db,
        scan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KeyEstimate {
    /// Q(v) ≤ 2(S_ω(v) - S_ω(φ)) up to the tolerance; `gap` is rhs - lhs.
    Holds { gap: f64 },
    Violated { gap: f64 },
    Inapplicable,
}

/// Checks Q(v) ≤ 2(S_ω(v) - S_ω(φ)) for v with ||v|| ≤ ||φ||, K_ω(v) ≤ 0 and
/// Q(v) ≤ 0, provided D(ω) ≤ 0.
pub fn key_estimate_check(v: &RadialField, p: &ModelParams, omega: f64, gs: &GroundStateResult) -> Result<KeyEstimate> {
    let m = classify(v, p, omega, gs)?;
    let applicable = m.margins.mass > -BOUNDARY_BAND
        && m.margins.nehari > -BOUNDARY_BAND
        && m.margins.virial < BOUNDARY_BAND
        && second_variation(gs, p) <= 0.0;
    if !applicable {
        return Ok(KeyEstimate::Inapplicable);
    }
    let r = &m.report;
    let gap = 2.0 * (r.action_S - gs.action_d) - r.virial_Q;
    let tol = BOUNDARY_BAND * r.scale().max(gs.report.scale());
    Ok(if gap >= -tol {
        KeyEstimate::Holds { gap }
    } else {
        KeyEstimate::Violated { gap }
    })
}

/// (e^x - 1 - x) / x², accurate for small |x|.
fn phi2(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

pub fn g1(sigma: f64, beta: f64, lam: f64) -> f64 {
    let s = sigma;
    let b = beta;
    2.0 * s * (2.0 - s) * lam.powf(b) - s * b * (b - s) * lam * lam + 2.0 * b * (b - 2.0) * lam.powf(s)
        - (b - s) * (b - 2.0) * (2.0 - s)
}

pub fn g2(sigma: f64, beta: f64, lam: f64) -> f64 {
    let s = sigma;
    (2.0 - s) * lam.powf(beta - s) - (beta - s) * lam.powf(2.0 - s) + beta - 2.0
}

/// The ratio function g of the key estimate,
///   (2 - σλ^{2-σ})(2λ^β - βλ² - 2 + β) / (βλ^{β-σ}(σλ² - 2λ^σ - σ + 2))
///     - λ^{2-β} - (β-σ-2)/σ.
/// Numerator and denominator of the first term both vanish to second order
/// at λ = 1; they are rewritten through phi2 so the quotient stays accurate.
pub fn g_ratio(sigma: f64, beta: f64, lam: f64) -> f64 {
    let (s, b) = (sigma, beta);
    let u = lam.ln();
    let q = (b * phi2(b * u) - 2.0 * phi2(2.0 * u)) / (2.0 * phi2(2.0 * u) - s * phi2(s * u));
    (2.0 - s * lam.powf(2.0 - s)) * q / (s * lam.powf(b - s)) - lam.powf(2.0 - b) - (b - s - 2.0) / s
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotoneLemma {
    pub sigma: f64,
    pub beta: f64,
    pub points: usize,
    pub g2_min: f64,
    pub g1_max: f64,
    pub g_min: f64,
    pub holds: bool,
}

/// Evaluates g₂ ≥ 0, g₁ ≤ 0 and g ≥ 0 on `points` interior nodes of (0, 1),
/// each with an absolute slack of 1e-12.
pub fn monotone_lemma_check(sigma: f64, beta: f64, points: usize) -> Result<MonotoneLemma> {
    if !(sigma > 0.0 && sigma < 2.0 && beta > 2.0) {
        return Err(param("sigma/beta", format!("need 0 < sigma < 2 < beta, got ({sigma}, {beta})")));
    }
    let (mut g2_min, mut g1_max, mut g_min) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for k in 1..=points {
        let lam = k as f64 / (points + 1) as f64;
        g2_min = g2_min.min(g2(sigma, beta, lam));
        g1_max = g1_max.max(g1(sigma, beta, lam));
        g_min = g_min.min(g_ratio(sigma, beta, lam));
    }
    const SLACK: f64 = 1e-12;
    Ok(MonotoneLemma {
        sigma,
        beta,
        points,
        g2_min,
        g1_max,
        g_min,
        holds: g2_min >= -SLACK && g1_max <= SLACK && g_min >= -SLACK,
    })
}

/// Deterministic sample family: μ·φ^λ on a log grid of (λ, μ) plus
/// Gaussian bumps matched to φ's mass. Returns exactly `count` fields.
pub fn sample_family(gs: &GroundStateResult, count: usize) -> Result<Vec<RadialField>> {
    let phi = &gs.phi;
    let g = phi.grid.clone();
    let m_phi = gs.report.mass;
    let n_scaled = count * 4 / 5;
    let n_lam = (n_scaled as f64).sqrt().ceil() as usize;
    let n_mu = n_scaled.div_ceil(n_lam);
    let mut out = Vec::with_capacity(count);
    'outer: for i in 0..n_lam {
        let lam = 0.5 * 4f64.powf(i as f64 / (n_lam - 1).max(1) as f64);
        let base = rescale(phi, lam)?;
        for j in 0..n_mu {
            if out.len() == n_scaled {
                break 'outer;
            }
            let mu = 0.7 * (1.3f64 / 0.7).powf(j as f64 / (n_mu - 1).max(1) as f64);
            out.push(base.scaled(mu));
        }
    }
    let n_bumps = count - out.len();
    for k in 0..n_bumps {
        let t = k as f64 / n_bumps.max(1) as f64;
        let width = 0.3 * 10f64.powf(t);
        let f = RadialField::from_real_fn(g.clone(), |r| (-(r / width).powi(2) / 2.0).exp())?;
        let m = crate::functionals::mass(&f);
        // Mass fractions between 0.6 and 1.0 of the ground state.
        let target = m_phi * (0.6 + 0.4 * ((k * 7) % n_bumps.max(1)) as f64 / n_bumps.max(1) as f64);
        out.push(f.scaled((target / m).sqrt()));
    }
    Ok(out)
}

/// Shape families scanned for K⁺ data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeFamily {
    /// μ φ^λ, parameters (ln λ, ln μ).
    Scaled,
    /// Gaussian of width s carrying a fraction f of φ's mass, (ln s, f).
    Gaussian,
    /// Gaussian shell centred at c, (c, ln s, f).
    Shell,
}

#[derive(Debug, Clone, Serialize)]
pub struct KplusCandidate {
    pub family: ProbeFamily,
    pub params: Vec<f64>,
    /// min of the mass, action, Nehari and virial margins; positive inside K⁺.
    pub score: f64,
    pub margins: Margins,
}

#[derive(Debug, Clone, Serialize)]
pub struct KplusSearch {
    /// Best candidate per family after local refinement.
    pub best: Vec<KplusCandidate>,
    pub evaluated: usize,
    /// A classified K⁺ datum, if any candidate made it.
    #[serde(skip)]
    pub found: Option<RadialField>,
}

fn probe_field(family: ProbeFamily, x: &[f64], gs: &GroundStateResult) -> Result<RadialField> {
    let phi = &gs.phi;
    let m_phi = gs.report.mass;
    let bump = |f: &dyn Fn(f64) -> f64, frac: f64| -> Result<RadialField> {
        let v = RadialField::from_real_fn(phi.grid.clone(), f)?;
        let m = crate::functionals::mass(&v);
        if !(m > 0.0) {
            return Err(param("probe", "empty profile"));
        }
        Ok(v.scaled((frac.clamp(1e-6, 1.0) * m_phi / m).sqrt()))
    };
    match family {
        ProbeFamily::Scaled => Ok(rescale(phi, x[0].exp())?.scaled(x[1].exp().min(1.0))),
        ProbeFamily::Gaussian => {
            let s = x[0].exp();
            bump(&|r| (-(r / s).powi(2) / 2.0).exp(), x[1])
        }
        ProbeFamily::Shell => {
            let (c, s) = (x[0].max(0.0), x[1].exp());
            bump(&|r| (-((r - c) / s).powi(2) / 2.0).exp(), x[2])
        }
    }
}

fn kplus_score(m: &Margins) -> f64 {
    m.mass.min(m.action).min(m.nehari).min(m.virial)
}

fn evaluate(family: ProbeFamily, x: &[f64], p: &ModelParams, omega: f64, gs: &GroundStateResult) -> Option<KplusCandidate> {
    let v = probe_field(family, x, gs).ok()?;
    let c = classify(&v, p, omega, gs).ok()?;
    Some(KplusCandidate {
        family,
        params: x.to_vec(),
        score: kplus_score(&c.margins),
        margins: c.margins,
    })
}

/// Compass search maximising the K⁺ score from `start`.
fn refine(start: KplusCandidate, p: &ModelParams, omega: f64, gs: &GroundStateResult, budget: usize) -> (KplusCandidate, usize) {
    let mut best = start;
    let mut step = 0.2;
    let mut used = 0;
    while step > 1e-3 && used < budget {
        let mut improved = false;
        for k in 0..best.params.len() {
            for sgn in [1.0, -1.0] {
                let mut x = best.params.clone();
                x[k] += sgn * step;
                used += 1;
                if let Some(c) = evaluate(best.family, &x, p, omega, gs) {
                    if c.score > best.score {
                        best = c;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (best, used)
}

/// Scans the three probe families on coarse parameter grids, refines the
/// best point of each and reports whether any lands in K⁺_ω.
pub fn search_kplus(p: &ModelParams, omega: f64, gs: &GroundStateResult) -> Result<KplusSearch> {
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> { (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect() };
    let mut starts: Vec<(ProbeFamily, Vec<f64>)> = Vec::new();
    for &l in &lin(0.2f64.ln(), 5f64.ln(), 40) {
        for &m in &lin(0.3f64.ln(), 0.0, 20) {
            starts.push((ProbeFamily::Scaled, vec![l, m]));
        }
    }
    for &s in &lin(0.05f64.ln(), 20f64.ln(), 40) {
        for &f in &lin(0.05, 1.0, 20) {
            starts.push((ProbeFamily::Gaussian, vec![s, f]));
        }
    }
    for &c in &lin(0.5, 10.0, 12) {
        for &s in &lin(0.1f64.ln(), 5f64.ln(), 12) {
            for &f in &lin(0.1, 1.0, 6) {
                starts.push((ProbeFamily::Shell, vec![c, s, f]));
            }
        }
    }
    let scanned: Vec<Option<KplusCandidate>> = starts
        .par_iter()
        .map(|(fam, x)| evaluate(*fam, x, p, omega, gs))
        .collect();
    let mut evaluated = starts.len();
    let mut best = Vec::new();
    for fam in [ProbeFamily::Scaled, ProbeFamily::Gaussian, ProbeFamily::Shell] {
        let seed = scanned
            .iter()
            .flatten()
            .filter(|c| c.family == fam)
            .max_by(|a, b| a.score.total_cmp(&b.score))
            .cloned();
        if let Some(seed) = seed {
            let (c, used) = refine(seed, p, omega, gs, 400);
            evaluated += used;
            best.push(c);
        }
    }
    best.sort_by(|a, b| b.score.total_cmp(&a.score));
    let found = match best.first() {
        Some(c) if c.score > BOUNDARY_BAND => {
            let v = probe_field(c.family, &c.params, gs)?;
            (classify(&v, p, omega, gs)?.verdict == Membership::Kplus).then_some(v)
        }
        _ => None,
    };
    Ok(KplusSearch { best, evaluated, found })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auxiliary_functions_vanish_at_one() {
        for &(s, b) in &[(0.5, 3.0), (1.0, 3.0), (1.5, 4.0)] {
            assert!(g1(s, b, 1.0).abs() < 1e-12);
            assert!(g2(s, b, 1.0).abs() < 1e-12);
            assert!(g_ratio(s, b, 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g_ratio_matches_direct_formula_away_from_one() {
        let (s, b) = (0.7, 3.3);
        for &lam in &[0.1, 0.4, 0.8] {
            let direct = (2.0 - s * f64::powf(lam, 2.0 - s)) * (2.0 * f64::powf(lam, b) - b * lam * lam - 2.0 + b)
                / (b * f64::powf(lam, b - s) * (s * lam * lam - 2.0 * f64::powf(lam, s) - s + 2.0))
                - f64::powf(lam, 2.0 - b)
                - (b - s - 2.0) / s;
            assert!((direct - g_ratio(s, b, lam)).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn phi2_is_continuous_across_switch() {
        for x in [0.999e-3f64, -0.999e-3] {
            let direct = (x.exp_m1() - x) / (x * x);
            assert!((phi2(x) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_lemma_parameters() {
        assert!(monotone_lemma_check(0.5, 2.0, 10).is_err());
        assert!(monotone_lemma_check(2.0, 3.0, 10).is_err());
    }
}
