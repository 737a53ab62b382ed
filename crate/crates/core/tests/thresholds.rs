use nlsp::elliptic::{find_ground_state_shooting, GroundStateResult, Resolution};
use nlsp::functionals::rescale;
use nlsp::thresholds::{
    classify, find_omega0, find_omega0_with, g1, g2, g_ratio, key_estimate_check, monotone_lemma_check, sample_family,
    search_kplus, second_variation, second_variation_fd, KeyEstimate, Membership,
};
use nlsp::{Error, ModelParams, RadialField};
use proptest::prelude::*;

fn supercritical() -> ModelParams {
    ModelParams::new(3, 0.5, 2.0).unwrap()
}

fn ground_state(om: f64) -> GroundStateResult {
    find_ground_state_shooting(&supercritical(), om, &Resolution { n: 8192, r_max: 30.0 / om.sqrt() }).unwrap()
}

#[test]
fn monotone_lemma_on_fine_grids() {
    for &(s, b) in &[(0.5, 3.0), (1.0, 3.0), (1.5, 4.0)] {
        let m = monotone_lemma_check(s, b, 10_000).unwrap();
        assert!(m.holds, "{m:?}");
        assert!(m.g2_min >= -1e-12 && m.g1_max <= 1e-12);
    }
}

proptest! {
    #[test]
    fn auxiliary_signs(s in 0.05f64..1.95, b in 2.05f64..6.0, lam in 0.001f64..0.999) {
        prop_assert!(g2(s, b, lam) >= -1e-12);
        prop_assert!(g1(s, b, lam) <= 1e-12);
        prop_assert!(g_ratio(s, b, lam) >= -1e-9);
    }

    #[test]
    fn g2_derivative_sign(s in 0.05f64..1.95, b in 2.05f64..6.0, lam in 0.01f64..0.99) {
        // g₂' = (2-σ)(β-σ)λ^{1-σ}(λ^{β-2} - 1) ≤ 0 on (0, 1), so g₂ decreases to g₂(1) = 0.
        let h = 1e-6;
        let d = (g2(s, b, lam + h) - g2(s, b, lam - h)) / (2.0 * h);
        let exact = (2.0 - s) * (b - s) * lam.powf(1.0 - s) * (lam.powf(b - 2.0) - 1.0);
        prop_assert!((d - exact).abs() < 1e-5 * (1.0 + exact.abs()));
        prop_assert!(exact <= 0.0);
    }
}

#[test]
fn second_variation_matches_finite_difference() {
    let p = supercritical();
    let gs = ground_state(1.0);
    let d = second_variation(&gs, &p);
    let fd = second_variation_fd(&gs, &p, 1e-3).unwrap();
    assert!((d - fd).abs() <= 1e-3 * d.abs(), "{d} vs {fd}");
    assert!(d < 0.0);
}

#[test]
fn omega0_on_synthetic_curves() {
    let t = find_omega0_with((0.1, 10.0), 1e-10, &|om| Ok(1.0 - om)).unwrap();
    assert!((t.omega0 - 1.0).abs() < 1e-9 && !t.below_bracket);
    let t = find_omega0_with((0.1, 10.0), 1e-8, &|_| Ok(-1.0)).unwrap();
    assert!(t.below_bracket && t.omega0 == 0.1);
    assert!(matches!(find_omega0_with((0.1, 10.0), 1e-8, &|_| Ok(1.0)), Err(Error::NotFound(_))));
    assert!(find_omega0_with((1.0, 0.5), 1e-8, &|_| Ok(1.0)).is_err());
}

#[test]
fn omega0_for_the_supercritical_reference() {
    let p = supercritical();
    let t = find_omega0(&p, (0.45, 20.0), 1e-4).unwrap();
    assert!(!t.below_bracket);
    assert!(t.d_at_omega0 <= 0.0);
    let before = nlsp::thresholds::second_variation_at(&p, t.omega0 * (1.0 - 2e-4)).unwrap();
    assert!(before > 0.0, "D just below omega0 = {before}");
}

#[test]
fn classification_of_scaled_ground_states() {
    let p = supercritical();
    let gs = ground_state(1.0);
    for lam in [1.1, 1.2, 1.3] {
        let v = rescale(&gs.phi, lam).unwrap().scaled(0.99);
        let m = classify(&v, &p, 1.0, &gs).unwrap();
        assert_eq!(m.verdict, Membership::Kminus, "lambda {lam}");
        assert!(m.b_omega());
    }
    // φ itself sits on the boundary of every set.
    let m = classify(&gs.phi, &p, 1.0, &gs).unwrap();
    assert!(m.boundary);
    assert_eq!(m.verdict, Membership::Neither);
    // Too much mass.
    let m = classify(&gs.phi.scaled(1.05), &p, 1.0, &gs).unwrap();
    assert!(!m.in_mass_ball);
    assert!(classify(&RadialField::zeros(gs.phi.grid.clone()), &p, 1.0, &gs).is_err());
}

#[test]
fn kminus_and_b_omega_agree_on_the_family() {
    let p = supercritical();
    let gs = ground_state(1.0);
    let fam = sample_family(&gs, 100).unwrap();
    assert_eq!(fam.len(), 100);
    let mut kminus = 0;
    for v in &fam {
        let m = classify(v, &p, 1.0, &gs).unwrap();
        assert_eq!(m.verdict == Membership::Kminus, m.b_omega(), "{:?}", m.margins);
        kminus += usize::from(m.verdict == Membership::Kminus);
    }
    assert!(kminus >= 5, "only {kminus} K- members");
}

#[test]
fn key_estimate_on_the_family() {
    let p = supercritical();
    let gs = ground_state(1.0);
    let mut applicable = 0;
    for v in &sample_family(&gs, 100).unwrap() {
        match key_estimate_check(v, &p, 1.0, &gs).unwrap() {
            KeyEstimate::Holds { .. } => applicable += 1,
            KeyEstimate::Violated { gap } => panic!("key estimate violated by {gap}"),
            KeyEstimate::Inapplicable => {}
        }
    }
    assert!(applicable >= 10);
}

#[test]
fn kplus_search_finds_nothing_above_omega0() {
    // Every probe family peaks at φ itself, where all margins vanish.
    let p = supercritical();
    let gs = ground_state(1.0);
    let s = search_kplus(&p, 1.0, &gs).unwrap();
    assert!(s.found.is_none());
    assert_eq!(s.best.len(), 3);
    assert!(s.best.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(s.best[0].score <= 0.0);
    assert!(s.evaluated > 2000);
}
