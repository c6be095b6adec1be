use std::f64::consts::PI;

use ymblow_core::evolve::{DiagnosticsRow, DiagnosticsSeries, EvolutionConfig, Evolution, OutcomeKind};
use ymblow_core::experiments::{
    anomalous_rate_fit, attractor_comparison, attractor_horizon, bisect_critical, cone_energy_limit,
    rate_ratio_trend, AmplitudeFamily, ConeTrend, ExperimentError,
};
use ymblow_core::model::{Dimension, Profile};
use ymblow_core::selfsimilar::{excited_profile, ShootSettings};

const D4: Dimension = Dimension::CRITICAL;
const D5: Dimension = Dimension::SUPERCRITICAL;

fn row(t: f64, w_rr0: f64, lambda: Option<f64>, distances: Vec<Option<f64>>) -> DiagnosticsRow {
    DiagnosticsRow {
        t,
        tau: None,
        w_rr0,
        lambda,
        e_cone: None,
        e_cone_kinetic: None,
        e_total: 1.0,
        flux_out: 0.0,
        depth: 0,
        synced: true,
        inner_deviation: 0.0,
        inner_energy: 0.0,
        distances,
    }
}

/// Distance that dips to 0.01 at t = 1, wiggles, then rises for good after t = 2.
fn dip(t: f64) -> f64 {
    if t < 1.0 {
        0.01 + 0.3 * (1.0 - t)
    } else if t < 2.0 {
        0.01 + 0.004 * (PI * (t - 1.0)).sin()
    } else {
        0.01 + 0.2 * (t - 2.0)
    }
}

fn dip_series() -> DiagnosticsSeries {
    let rows = (0..=300).map(|i| i as f64 * 0.01).map(|t| row(t, -1.0, None, vec![Some(dip(t))])).collect();
    DiagnosticsSeries { rows, profiles: vec!["W1".into()], ..Default::default() }
}

#[test]
fn departure_is_measured_from_the_last_minimum() {
    let cmp = attractor_comparison(&dip_series(), "W1").unwrap();
    assert!(cmp.approach);
    assert!((cmp.min_distance - 0.01).abs() < 1e-12);
    assert!((cmp.last_minimum.0 - 2.0).abs() < 1e-9, "{:?}", cmp.last_minimum);
    // 0.01 + 0.2 (t - 2) > 0.02 first at t = 2.06
    let t = cmp.departure.unwrap();
    assert!((t - 2.06).abs() < 0.011, "{t}");
    assert!(cmp.departure_time(3.0).unwrap() > t);
    assert!(cmp.intermediate_phase(0.05));
    assert!(!cmp.intermediate_phase(0.005));
}

#[test]
fn unknown_profile_is_an_error() {
    let e = attractor_comparison(&dip_series(), "W7").unwrap_err();
    assert!(matches!(e, ExperimentError::MissingProfile(_)));
}

#[test]
fn horizon_of_a_linearly_shrinking_scale() {
    // lambda = 0.5 (3 - t) for a profile with W''(0) = -2
    let rows = (0..=250)
        .map(|i| i as f64 * 0.01)
        .map(|t| {
            let lam: f64 = 0.5 * (3.0 - t);
            row(t, -2.0 / (lam * lam), Some(lam), vec![Some(dip(t))])
        })
        .collect();
    let series = DiagnosticsSeries { rows, profiles: vec!["W1".into()], ..Default::default() };
    let t = attractor_horizon(&series, "W1", -2.0, 0.05).unwrap();
    assert!((t - 3.0).abs() < 1e-9, "{t}");
}

/// `lambda = (T - t)^p` on a geometric approach to `T = 1`.
fn power_series(p: f64) -> DiagnosticsSeries {
    let rows = (0..400)
        .map(|i| 1.0 - 10f64.powf(-(i as f64) / 50.0))
        .map(|t| {
            let lam = (1.0 - t).powf(p);
            row(t, -3.2 / (lam * lam), Some(lam), vec![])
        })
        .collect();
    DiagnosticsSeries { rows, ..Default::default() }
}

#[test]
fn anomalous_exponent_of_a_synthetic_law() {
    let a = anomalous_rate_fit(&power_series(1.1)).unwrap();
    assert!((a.alpha - 0.1).abs() < 1e-6, "{}", a.alpha);
    assert!(a.reliable);
    assert!((a.fit.blowup_time - 1.0).abs() < 1e-8);
}

#[test]
fn rate_ratio_decreases_for_faster_than_linear_collapse() {
    let (samples, monotone) = rate_ratio_trend(&power_series(1.1), 1.0, 3.0, 10).unwrap();
    assert!(monotone);
    assert!(samples.len() >= 25, "{}", samples.len());
    let (_, flat) = rate_ratio_trend(&power_series(1.0), 1.0, 3.0, 10).unwrap();
    assert!(!flat);
}

/// Cumulative energies with `E(rho) = total(rho)` and kinetic part `kinetic(rho)`, stored on a log grid.
fn cone_series(total: impl Fn(f64, f64) -> f64, kinetic: impl Fn(f64, f64) -> f64) -> DiagnosticsSeries {
    let cone_radii: Vec<f64> = (-60..=10).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    let times: Vec<f64> = (0..300).map(|i| 1.0 - 10f64.powf(-(i as f64) / 60.0)).collect();
    let rows = times.iter().map(|&t| row(t, -1.0, None, vec![])).collect();
    let cone_total = times.iter().map(|&t| cone_radii.iter().map(|&rho| total(1.0 - t, rho)).collect()).collect();
    let cone_kinetic = times.iter().map(|&t| cone_radii.iter().map(|&rho| kinetic(1.0 - t, rho)).collect()).collect();
    DiagnosticsSeries { rows, cone_radii, cone_total, cone_kinetic, ..Default::default() }
}

#[test]
fn vacuum_cone_energy_vanishes() {
    let lim = cone_energy_limit(&cone_series(|_, _| 0.0, |_, _| 0.0), 1.0, false).unwrap();
    assert_eq!(lim.trend, ConeTrend::Vanishing);
    assert_eq!(lim.limit, 0.0);
    assert_eq!(lim.decay_exponent, None);
}

#[test]
fn self_similar_cone_energy_vanishes_linearly() {
    // a profile at scale s = T - t holds energy c s inside |x| < s
    let g = |x: f64| x.powi(3) / (1.0 + x.powi(3));
    let lim = cone_energy_limit(&cone_series(|s, rho| 2.0 * s * g(rho / s), |s, rho| 0.5 * s * g(rho / s)), 1.0, false).unwrap();
    assert_eq!(lim.trend, ConeTrend::Vanishing);
    assert!((lim.decay_exponent.unwrap() - 1.0).abs() < 1e-3, "{:?}", lim.decay_exponent);
    // the window opens at the last sample at least a decade out
    assert!((0.09..0.1001).contains(&lim.decade_ratio), "{}", lim.decade_ratio);
    assert!(lim.decreasing);
}

#[test]
fn concentrating_energy_extrapolates_to_the_bubble() {
    // a bubble of energy 16 pi^2 plus a radiating kinetic remainder shrinking like sqrt(rho)
    let bubble = 16.0 * PI * PI;
    let lim = cone_energy_limit(&cone_series(|_, rho| bubble + 3.0 * rho.sqrt(), |_, rho| 3.0 * rho.sqrt()), 1.0, false).unwrap();
    assert_eq!(lim.trend, ConeTrend::Concentrating);
    assert!((lim.limit - bubble).abs() < 1e-6 * bubble, "{}", lim.limit);
    assert!(lim.kinetic_fraction > 0.0 && lim.kinetic_fraction < 0.05);
}

#[test]
fn cone_energy_needs_a_decade() {
    let mut s = cone_series(|_, _| 1.0, |_, _| 0.0);
    s.rows.truncate(30);
    s.cone_total.truncate(30);
    s.cone_kinetic.truncate(30);
    assert!(matches!(cone_energy_limit(&s, 1.0, false), Err(ExperimentError::Insufficient(_))));
}

#[test]
fn supercritical_blowup_is_at_the_self_similar_rate() {
    let rec = Evolution::new(EvolutionConfig::new(D5, 0.2)).unwrap().run().unwrap();
    let a = anomalous_rate_fit(&rec.series).unwrap();
    assert!(a.alpha.abs() < 0.05, "alpha {}", a.alpha);
}

#[test]
fn generic_blowup_skips_the_excited_profile() {
    let w1 = excited_profile(&ShootSettings::default()).unwrap().profile();
    let tracked = vec![("W1".to_string(), w1)];
    let rec = AmplitudeFamily::new(EvolutionConfig::new(D5, 0.0)).run(0.2, &tracked).unwrap();
    assert_eq!(rec.outcome.kind, OutcomeKind::Blowup);
    let cmp = attractor_comparison(&rec.series, "W1").unwrap();
    assert!(!cmp.intermediate_phase(0.05), "min distance {}", cmp.min_distance);
}

#[test]
fn critical_dimension_bracket_shrinks() {
    let family = AmplitudeFamily::new(EvolutionConfig::new(D4, 0.0));
    let b = bisect_critical(|a| Ok(family.classify(a)?), 0.1, 0.5, 0.2).unwrap();
    assert!(b.bracket.invariant_holds());
    assert!(b.bracket.width() <= 0.2 * b.bracket.a_hi);
    assert!(b.bracket.history.len() > 2);
    assert!(b.critical > 0.1 && b.critical < 0.5);
}

#[test]
fn runs_are_deterministic() {
    let tracked = vec![("W0".to_string(), Profile::W0)];
    let family = AmplitudeFamily::new(EvolutionConfig::new(D5, 0.0));
    let a = family.run(0.15, &tracked).unwrap();
    let b = family.run(0.15, &tracked).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.outcome, b.outcome);
}
